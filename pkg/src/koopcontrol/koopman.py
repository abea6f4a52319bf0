"""Galerkin approximation of the Koopman generator on a Legendre basis.

For dynamics xd = f(x) restricted to a box, write the flow in unit
coordinates u (the box mapped onto [-1, 1]^d).  The chain rule turns f into

    ft_j(u) = f_j(x(u)) * du_j / dx_j = f_j(x(u)) / h_j

with h_j the box half-width of axis j.  Each basis function L_i then
evolves along trajectories as

    d/dt L_i(u(t)) = sum_j dL_i/du_j * ft_j(u)

and projecting the right side back onto the basis gives the generator
matrix K with row i holding the projection coefficients,

    K_ij = < sum_k dL_i/du_k * ft_k , L_j >.

The vector of basis values therefore satisfies approximately
l(t) = exp(K t) l(0), and any observable with basis coefficients H follows
as g(t) = H l(t).  The per-row truncation residual (the L2 mass falling
outside the basis) is reported alongside K.

Spectral solution: with left eigenvectors V (rows, V K = diag(w) V),
exp(K t) = V^{-1} exp(diag(w) t) V.  When the eigenvector matrix is
ill-conditioned, which happens systematically for the resonant orbital
problems this package targets (repeated +-i n eigenvalues make K
defective), the model falls back to the real matrix exponential; the two
paths agree whenever both are defined.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np
from scipy.linalg import eig, expm

from .basis import (BasisSpec, DomainBox, expand_in_basis,
                    legendre_to_monomial)
from .polynomial import MultiPoly, PolyMap, map_compose

COND_LIMIT = 1e12
IMAG_TOL = 1e-8


class KoopmanDecompositionError(RuntimeError):
    """Eigendecomposition too ill-conditioned to trust."""

    def __init__(self, message: str, condition: float):
        super().__init__(message)
        self.condition = condition


def _unit_dynamics(dynamics: PolyMap, box: DomainBox) -> list[MultiPoly]:
    """Box-scaled dynamics ft_j(u) = f_j(x(u)) / h_j in unit coordinates."""
    d = box.dim
    if dynamics.num_vars_in != d or dynamics.num_outputs != d:
        raise ValueError("dynamics must be square and match the box dimension")
    c = box.centers
    h = box.half_widths
    centered = bool(np.all(c == 0.0))
    rows = []
    for j, p in enumerate(dynamics.components):
        terms: dict[tuple[int, ...], float] = {}
        for exps, coef in p.terms.items():
            if centered:
                w = coef
                for hi, e in zip(h, exps):
                    if e:
                        w *= hi ** e
                terms[exps] = terms.get(exps, 0.0) + w
            else:
                # expand prod_i (c_i + h_i u_i)^{e_i} one axis at a time
                partial = {(): coef}
                for axis, e in enumerate(exps):
                    nxt: dict[tuple[int, ...], float] = {}
                    for t in range(e + 1):
                        w = math.comb(e, t) * c[axis] ** (e - t) * h[axis] ** t
                        if w == 0.0:
                            continue
                        for stub, val in partial.items():
                            key = stub + (t,)
                            nxt[key] = nxt.get(key, 0.0) + val * w
                    partial = nxt
                for stub, val in partial.items():
                    terms[stub] = terms.get(stub, 0.0) + val
        scale = 1.0 / h[j]
        rows.append(MultiPoly(d, {e: v * scale for e, v in terms.items()},
                              prune_tol=0.0))
    return rows


def build_koopman_matrix(dynamics: PolyMap, spec: BasisSpec, box: DomainBox
                         ) -> tuple[np.ndarray, np.ndarray]:
    """Generator matrix K and per-row truncation residuals.

    ``dynamics`` is given in the box's own coordinates; the unit-box chain
    rule is applied here.  Row i of K expands d/dt L_i exactly and keeps
    the in-basis part; the residual entry is the L2 norm of the rest.
    """
    if spec.dim != box.dim:
        raise ValueError("basis and box dimension disagree")
    ftilde = [p.terms for p in _unit_dynamics(dynamics, box)]
    funcs = spec.basis_functions()
    partials = [[fn.derivative(j).terms for j in range(spec.dim)]
                for fn in funcs]
    K = np.zeros((spec.size, spec.size))
    residuals = np.zeros(spec.size)
    for i in range(spec.size):
        row_terms: dict[tuple[int, ...], float] = {}
        for j in range(spec.dim):
            dij = partials[i][j]
            if not dij:
                continue
            fj = ftilde[j]
            for ea, ca in dij.items():
                for eb, cb in fj.items():
                    key = tuple(a + b for a, b in zip(ea, eb))
                    row_terms[key] = row_terms.get(key, 0.0) + ca * cb
        p = MultiPoly(spec.dim, row_terms, prune_tol=0.0)
        inside, overflow = expand_in_basis(p, spec)
        K[i] = inside
        residuals[i] = math.sqrt(sum(v * v for v in overflow.values()))
    return K, residuals


def default_observables(spec: BasisSpec) -> PolyMap:
    """The unit coordinates themselves, one observable per axis."""
    return PolyMap.identity(spec.dim)


def build_observable_matrix(observables: PolyMap, spec: BasisSpec) -> np.ndarray:
    """Basis coefficients of each observable, stacked as rows of H.

    Observables must lie inside the basis span; a truncation residual
    beyond roundoff raises, since a lossy H would silently bias every
    propagated value.
    """
    if observables.num_vars_in != spec.dim:
        raise ValueError("observables must use the basis dimension")
    H = np.zeros((observables.num_outputs, spec.size))
    for i, p in enumerate(observables.components):
        inside, overflow = expand_in_basis(p, spec)
        residual = math.sqrt(sum(v * v for v in overflow.values()))
        norm = math.sqrt(float(inside @ inside) + residual * residual)
        if residual > 1e-12 * max(norm, 1.0):
            raise ValueError(
                f"observable {i} has degree beyond the basis order "
                f"(residual {residual:.3e}); enlarge the basis")
        H[i] = inside
    return H


@dataclass(frozen=True)
class Spectral:
    """Left eigensystem of K: modes @ K = diag(eigenvalues) @ modes."""

    eigenvalues: np.ndarray
    modes: np.ndarray
    modes_inv: np.ndarray
    condition: float


def spectral_decompose(K: np.ndarray, cond_limit: float = COND_LIMIT) -> Spectral:
    """Left eigendecomposition with a conditioning gate.

    Raises KoopmanDecompositionError when the eigenvector matrix condition
    number exceeds ``cond_limit`` (defective or nearly defective K), in
    which case downstream code should use the matrix exponential instead.
    """
    K = np.asarray(K, dtype=float)
    w, Wr = eig(K.T)
    V = Wr.T
    condition = float(np.linalg.cond(V))
    if not np.isfinite(condition) or condition > cond_limit:
        gaps = np.abs(np.subtract.outer(w, w))
        np.fill_diagonal(gaps, np.inf)
        raise KoopmanDecompositionError(
            f"eigenvector condition number {condition:.3e} exceeds "
            f"{cond_limit:.1e}; smallest eigenvalue gap {gaps.min():.3e} "
            "suggests repeated eigenvalues (defective generator)",
            condition)
    return Spectral(w, V, np.linalg.inv(V), condition)


class KoopmanModel:
    """Bundled generator, observables and solution path for one system."""

    def __init__(self, spec: BasisSpec, box: DomainBox, K: np.ndarray,
                 H: np.ndarray, residuals: np.ndarray,
                 spectral: Spectral | None, mode: str, diagnostics: dict,
                 unit_dynamics: PolyMap | None = None,
                 observables: PolyMap | None = None,
                 identity_observables: bool = False):
        self.spec = spec
        self.box = box
        self.K = K
        self.H = H
        self.residuals = residuals
        self.spectral = spectral
        self.mode = mode
        self.diagnostics = diagnostics
        self.unit_dynamics = unit_dynamics
        self.observables = observables
        self.identity_observables = identity_observables

    @classmethod
    def build(cls, dynamics: PolyMap, spec: BasisSpec, box: DomainBox,
              observables: PolyMap | None = None,
              cond_limit: float = COND_LIMIT) -> "KoopmanModel":
        K, residuals = build_koopman_matrix(dynamics, spec, box)
        identity_default = observables is None
        if observables is None:
            observables = default_observables(spec)
        H = build_observable_matrix(observables, spec)
        diagnostics: dict = {
            "basis_size": spec.size,
            "max_row_residual": float(residuals.max()) if spec.size else 0.0,
        }
        try:
            spectral = spectral_decompose(K, cond_limit)
            mode = "spectral"
            diagnostics["eigenvector_condition"] = spectral.condition
        except KoopmanDecompositionError as err:
            spectral = None
            mode = "expm"
            diagnostics["eigenvector_condition"] = err.condition
            diagnostics["decomposition_error"] = str(err)
        unit = PolyMap(_unit_dynamics(dynamics, box))
        return cls(spec, box, K, H, residuals, spectral, mode, diagnostics,
                   unit_dynamics=unit, observables=observables,
                   identity_observables=identity_default)

    def _demote(self, reason: str) -> None:
        """Switch permanently to the matrix-exponential path.

        A decomposition can clear the build-time condition gate and still
        leave too much imaginary residue in reconstructed flows (nearly
        defective K).  The exponential path has no such failure mode, so
        trading speed for a trustworthy answer is the right move.
        """
        self.mode = "expm"
        self.diagnostics["demoted"] = reason

    def flow_matrix(self, t: float) -> np.ndarray:
        """exp(K t) by the active solution path, always real."""
        if t == 0.0:
            # the spectral product inv(V) V carries the eigenvector
            # conditioning as noise; the zero-time flow is exactly known
            return np.eye(self.spec.size)
        if self.mode == "spectral":
            s = self.spectral
            M = s.modes_inv @ (np.exp(s.eigenvalues * t)[:, None] * s.modes)
            imag = np.linalg.norm(M.imag)
            real = np.linalg.norm(M.real)
            if imag > IMAG_TOL * max(real, 1.0):
                self._demote(
                    f"imaginary residual {imag:.3e} exceeds "
                    f"{IMAG_TOL:.1e} x {max(real, 1.0):.3e} in the spectral "
                    f"flow at t={t:g}")
            else:
                return M.real
        return expm(self.K * t)

    def propagate(self, x0: Sequence[float],
                  times: float | Sequence[float]) -> np.ndarray:
        """Observable history g(t) for one initial state in box coordinates.

        With the default identity observables the result rows are mapped
        back to box coordinates, so they are directly comparable with a
        numerically integrated trajectory.  Custom observables come back
        as raw values.  A scalar ``times`` gives a single vector; an array
        gives shape (len(times), n_observables).
        """
        u0 = self.box.to_unit(np.asarray(x0, dtype=float))
        if np.any(np.abs(u0) > 1.0 + 1e-9):
            worst = int(np.argmax(np.abs(u0)))
            warnings.warn(
                f"initial state leaves the domain box on axis {worst} "
                f"(unit coordinate {u0[worst]:+.4f}); accuracy degrades "
                "outside the box", stacklevel=2)
        ell0 = self.spec.evaluate_all(u0)
        scalar = np.ndim(times) == 0
        tvec = np.atleast_1d(np.asarray(times, dtype=float))
        out = np.empty((tvec.size, self.H.shape[0]))
        if self.mode == "spectral":
            s = self.spectral
            z = s.modes @ ell0
            for k, t in enumerate(tvec):
                y = s.modes_inv @ (np.exp(s.eigenvalues * t) * z)
                g = self.H @ y
                imag = np.linalg.norm(g.imag)
                if imag > IMAG_TOL * max(np.linalg.norm(g.real), 1.0):
                    self._demote(
                        f"imaginary residual {imag:.3e} in propagated "
                        f"observables at t={t:g}")
                    break
                out[k] = g.real
        if self.mode == "expm":
            for k, t in enumerate(tvec):
                out[k] = self.H @ (expm(self.K * t) @ ell0)
        if self.identity_observables:
            out = self.box.from_unit(out)
        return out[0] if scalar else out

    def transition_map(self, tf: float,
                       rows: Sequence[int] | None = None,
                       steps: int = 1) -> PolyMap:
        """Observables at time tf as polynomials of the unit initial state.

        ``rows`` selects observables (default: all).  With ``steps`` = 1,
        row r is the basis recombination of (H exp(K tf))_r in monomial
        form.  ``steps`` > 1 builds the map at tf / steps and composes it
        with itself in map space (truncated at the basis order), which is
        the semigroup identity applied to the polynomial maps.

        The stepped form exists because projecting a system whose linear
        part is defective (nested Jordan blocks, as in orbital rendezvous
        costate dynamics) leaves truncation noise that splits the Jordan
        chains into eigenvalue rings of radius ~ noise^(1/chain length).
        The resulting spurious growth makes one long exp(K tf) useless at
        multi-orbit horizons, while short-horizon maps stay accurate and
        compose stably.  ``steps`` > 1 requires the default identity
        observables since composition needs a square map.
        """
        if steps < 1:
            raise ValueError("steps must be a positive integer")
        if steps == 1:
            T = self.H @ self.flow_matrix(tf)
            if rows is None:
                rows = range(T.shape[0])
            comps = [legendre_to_monomial(T[r], self.spec) for r in rows]
            return PolyMap(comps)
        if not self.identity_observables:
            raise ValueError(
                "stepped transition maps need the identity observables")
        step_map = self.transition_map(tf / steps)
        order = self.spec.max_order
        total = step_map
        for _ in range(steps - 1):
            total = map_compose(step_map, total, order)
        if rows is not None:
            total = PolyMap([total.components[r] for r in rows])
        return total
