"""Truncated inversion of polynomial maps and boundary-value assembly.

The forward object is the stacked map

    F(xi) = [ x_f(x_0, lam_0) ; x_0 ]

whose first block comes from a transition map and whose second block is the
identity on the initial state.  Inverting F as a truncated polynomial map
and reading off the costate rows turns every two-point boundary query into
a polynomial evaluation: no per-query integration or iteration.

Inversion uses the fixed-point construction.  Split M = M(0) + L xi + N(xi)
with L the linear part and N the terms of degree two and up.  For
eta = y - M(0),

    W_0 = L^{-1} eta,
    W_{k+1} = L^{-1} (eta - N(W_k)),

each step truncated at the working order; after trunc_order - 1 updates the
composition W(M(xi)) equals the identity through that order (each update
freezes one more degree).  The composition residual is computed and stored
so callers can verify rather than trust.
"""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from .basis import DomainBox
from .polynomial import MultiPoly, PolyMap, TruncatedAlgebra

COND_LIMIT = 1e12


class MapInversionError(RuntimeError):
    """The linear part is too ill-conditioned to invert reliably."""


def _monomial_matrix(algebra: TruncatedAlgebra,
                     component_vecs: np.ndarray) -> np.ndarray:
    """Rows = dense vectors of every monomial in the given components.

    Row k holds the truncated expansion of prod_i comp_i^{alpha_i} for the
    k-th monomial alpha of the algebra, built incrementally so each row
    costs one truncated multiply.
    """
    size = algebra.size
    M = np.empty((size, size))
    M[0] = 0.0
    M[0, 0] = 1.0
    for k, exps in enumerate(algebra.monomials):
        if k == 0:
            continue
        var = next(i for i, e in enumerate(exps) if e > 0)
        parent = list(exps)
        parent[var] -= 1
        M[k] = algebra.multiply(M[algebra.index[tuple(parent)]],
                                component_vecs[var])
    return M


def _compose_dense(algebra: TruncatedAlgebra, outer: np.ndarray,
                   inner: np.ndarray) -> np.ndarray:
    """Truncated composition on dense coefficient matrices (rows = outputs)."""
    return outer @ _monomial_matrix(algebra, inner)


def invert_map(m: PolyMap, trunc_order: int,
               cond_limit: float = COND_LIMIT) -> tuple[PolyMap, float]:
    """Truncated inverse W with W(m(xi)) = xi through ``trunc_order``.

    Returns (W, residual) where the residual is the largest coefficient by
    which the composition W(m(.)) misses the identity map at the working
    order, relative to the largest forward coefficient when that exceeds
    one.  For maps with order-one coefficients this is the plain absolute
    measure; the relative form matters for flow maps whose secular terms
    push coefficients to 1e3 and beyond, where the closure products cancel
    from that scale and an absolute reading would only report roundoff.
    Raises MapInversionError when the linear part of ``m`` has condition
    number beyond ``cond_limit``.
    """
    d = m.num_vars_in
    if m.num_outputs != d:
        raise ValueError("only square maps are invertible")
    if trunc_order < 1:
        raise ValueError("trunc_order must be at least 1")
    algebra = TruncatedAlgebra(d, trunc_order)
    vecs = np.stack([algebra.to_vector(p.truncate(trunc_order))
                     for p in m.components])
    b = vecs[:, 0].copy()
    L = vecs[:, 1:d + 1].copy()
    cond = np.linalg.cond(L)
    if not np.isfinite(cond) or cond > cond_limit:
        raise MapInversionError(
            f"linear part has condition number {cond:.3e} (limit "
            f"{cond_limit:.1e}); the map is not invertible at this scale")
    Linv = np.linalg.inv(L)
    N = vecs.copy()
    N[:, 0] = 0.0
    N[:, 1:d + 1] = 0.0
    eta = np.zeros((d, algebra.size))
    eta[:, 1:d + 1] = np.eye(d)
    W = Linv @ eta
    if np.any(N):
        for _ in range(trunc_order - 1):
            W = Linv @ (eta - _compose_dense(algebra, N, W))
    if np.any(b):
        shift = np.zeros((d, algebra.size))
        shift[:, 0] = -b
        shift[:, 1:d + 1] = np.eye(d)
        W = _compose_dense(algebra, W, shift)
    scale = max(1.0, float(np.abs(vecs).max()))
    residual = float(np.abs(_compose_dense(algebra, W, vecs) - eta).max()) / scale
    inverse = PolyMap([algebra.from_vector(w) for w in W])
    return inverse, residual


def build_tpbvp_map(state_rows: PolyMap, n_states: int) -> PolyMap:
    """Stack final-state rows over an identity block on the initial state.

    ``state_rows`` maps (u_x0, u_lam0) to the final unit states; the result
    is the square map (u_x0, u_lam0) -> (u_xf, u_x0).
    """
    m = int(n_states)
    if state_rows.num_outputs != m:
        raise ValueError(f"expected {m} state rows, got {state_rows.num_outputs}")
    if state_rows.num_vars_in != 2 * m:
        raise ValueError("state rows must depend on (x0, lam0)")
    identity = [MultiPoly.variable(2 * m, i) for i in range(m)]
    return PolyMap(list(state_rows.components) + identity)


@dataclass
class TpbvpMap:
    """Forward and inverted boundary maps for one (model, basis, tf) triple.

    forward: (u_x0, u_lam0) -> (u_xf, u_x0).
    inverse: (u_xf, u_x0) -> (u_lam0, u_x0); costate rows first because
    they are the answer being queried.
    box: augmented domain box, state dims first, costate dims after.
    """

    forward: PolyMap
    inverse: PolyMap
    trunc_order: int
    box: DomainBox
    residual: float
    meta: dict

    @property
    def n_states(self) -> int:
        return self.forward.num_vars_in // 2

    def to_dict(self) -> dict:
        return {
            "forward": self.forward.to_dict(),
            "inverse": self.inverse.to_dict(),
            "trunc_order": self.trunc_order,
            "box": self.box.to_dict(),
            "residual": self.residual,
            "meta": self.meta,
        }

    @classmethod
    def from_dict(cls, data: Mapping) -> "TpbvpMap":
        return cls(PolyMap.from_dict(data["forward"]),
                   PolyMap.from_dict(data["inverse"]),
                   int(data["trunc_order"]),
                   DomainBox.from_dict(data["box"]),
                   float(data["residual"]),
                   dict(data.get("meta", {})))

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_json(cls, text: str) -> "TpbvpMap":
        return cls.from_dict(json.loads(text))


def invert_tpbvp(forward: PolyMap, box: DomainBox, trunc_order: int,
                 meta: dict | None = None,
                 cond_limit: float = COND_LIMIT) -> TpbvpMap:
    """Invert a stacked boundary map and order the costate rows first."""
    m = forward.num_vars_in // 2
    if forward.num_outputs != 2 * m or forward.num_vars_in != 2 * m:
        raise ValueError("forward map must be square with even dimension")
    if box.dim != 2 * m:
        raise ValueError("box must cover states and costates")
    raw, residual = invert_map(forward, trunc_order, cond_limit)
    inverse = PolyMap(list(raw.components[m:]) + list(raw.components[:m]))
    return TpbvpMap(forward, inverse, trunc_order, box, residual,
                    dict(meta or {}))


def solve_costates(tpbvp: TpbvpMap, x0: Sequence[float], xf: Sequence[float],
                   tol: float = 1e-9) -> tuple[np.ndarray, dict]:
    """Initial costates for the boundary pair, in the box's physical units.

    Both states should lie inside the state part of the domain box (the
    map is a polynomial fit on that box; outside it the answer is an
    extrapolation).  Slightly outside draws a warning, beyond twice the
    half-width is a hard error.  The returned info reports whether the
    costate landed inside its own box, i.e. whether the fit region was
    wide enough.
    """
    m = tpbvp.n_states
    x0 = np.asarray(x0, dtype=float)
    xf = np.asarray(xf, dtype=float)
    if x0.shape != (m,) or xf.shape != (m,):
        raise ValueError(f"boundary states must have {m} components")
    centers = tpbvp.box.centers
    half = tpbvp.box.half_widths
    u_x0 = (x0 - centers[:m]) / half[:m]
    u_xf = (xf - centers[:m]) / half[:m]
    for name, u in (("x0", u_x0), ("xf", u_xf)):
        amax = float(np.max(np.abs(u)))
        if amax > 2.0:
            worst = int(np.argmax(np.abs(u)))
            raise ValueError(
                f"{name} is far outside the domain box on state axis {worst} "
                f"(unit coordinate {u[worst]:+.4f}, limit 2.0)")
        if amax > 1.0 + tol:
            worst = int(np.argmax(np.abs(u)))
            warnings.warn(
                f"{name} leaves the domain box on state axis {worst} "
                f"(unit coordinate {u[worst]:+.4f}); the costate is an "
                "extrapolation", stacklevel=2)
    y = np.concatenate([u_xf, u_x0])
    u_lam = np.array([tpbvp.inverse.components[i].evaluate(y)
                      for i in range(m)])
    lam0 = centers[m:] + half[m:] * u_lam
    info = {
        "costate_unit": u_lam,
        "costate_in_box": bool(np.all(np.abs(u_lam) <= 1.0 + tol)),
        "inversion_residual": tpbvp.residual,
    }
    return lam0, info
