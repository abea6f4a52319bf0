"""Orthonormal Legendre tensor basis on a box domain.

The one-dimensional building blocks are Legendre polynomials normalized to
unit L2 norm on [-1, 1] with unit weight:

    Lhat_k(u) = sqrt((2 k + 1) / 2) * P_k(u)

Multivariate basis functions are tensor products indexed by multi-indices of
total degree at most ``max_order``, enumerated in graded-lex order.  All
inner products are evaluated exactly through monomial moments
integral of u^e over [-1, 1] = 2 / (e + 1) for even e and 0 for odd e.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from typing import Mapping, Sequence

import numpy as np

from .polynomial import MultiPoly, PolyMap, grlex_key, monomials_upto


@lru_cache(maxsize=None)
def legendre_coefficients(k: int) -> tuple[Fraction, ...]:
    """Monomial coefficients of the classical P_k, constant term first."""
    if k < 0:
        raise ValueError("degree must be non-negative")
    if k == 0:
        return (Fraction(1),)
    if k == 1:
        return (Fraction(0), Fraction(1))
    pkm1 = legendre_coefficients(k - 1)
    pkm2 = legendre_coefficients(k - 2)
    out = [Fraction(0)] * (k + 1)
    for i, c in enumerate(pkm1):
        out[i + 1] += Fraction(2 * k - 1, k) * c
    for i, c in enumerate(pkm2):
        out[i] -= Fraction(k - 1, k) * c
    return tuple(out)


def legendre_1d_normalized(k: int) -> MultiPoly:
    """Unit-norm Legendre polynomial of degree k as a 1-variable polynomial."""
    scale = math.sqrt((2 * k + 1) / 2.0)
    coeffs = legendre_coefficients(k)
    return MultiPoly(1, {(i,): scale * float(c)
                         for i, c in enumerate(coeffs) if c != 0},
                     prune_tol=0.0)


def monomial_moment(exponent: int) -> float:
    """Integral of u^e over [-1, 1]."""
    if exponent % 2:
        return 0.0
    return 2.0 / (exponent + 1)


@lru_cache(maxsize=None)
def _power_in_normalized_legendre(power: int) -> tuple[tuple[int, float], ...]:
    """Expansion u^power = sum_j c_j Lhat_j; pairs (j, c_j), exact rationals
    scaled by the normalization square roots."""
    out = []
    for j in range(power, -1, -1):
        if (power - j) % 2:
            continue
        acc = Fraction(0)
        for i, c in enumerate(legendre_coefficients(j)):
            if c and (power + i) % 2 == 0:
                acc += c * Fraction(2, power + i + 1)
        if acc != 0:
            out.append((j, math.sqrt((2 * j + 1) / 2.0) * float(acc)))
    return tuple(sorted(out))


@dataclass(frozen=True)
class DomainBox:
    """Axis-aligned box; maps between physical coordinates and [-1, 1]^d."""

    lower: tuple[float, ...]
    upper: tuple[float, ...]

    def __post_init__(self):
        lo = tuple(float(v) for v in self.lower)
        up = tuple(float(v) for v in self.upper)
        if len(lo) != len(up):
            raise ValueError("lower and upper must have equal length")
        if not lo:
            raise ValueError("box needs at least one dimension")
        for a, b in zip(lo, up):
            if not (b > a):
                raise ValueError(f"degenerate box interval [{a}, {b}]")
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", up)

    @classmethod
    def centered(cls, half_widths: Sequence[float],
                 centers: Sequence[float] | None = None) -> "DomainBox":
        hw = np.asarray(half_widths, dtype=float)
        c = np.zeros_like(hw) if centers is None else np.asarray(centers, dtype=float)
        return cls(tuple(c - hw), tuple(c + hw))

    @property
    def dim(self) -> int:
        return len(self.lower)

    @property
    def centers(self) -> np.ndarray:
        return (np.asarray(self.upper) + np.asarray(self.lower)) / 2.0

    @property
    def half_widths(self) -> np.ndarray:
        return (np.asarray(self.upper) - np.asarray(self.lower)) / 2.0

    def to_unit(self, x: Sequence[float]) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        return (x - self.centers) / self.half_widths

    def from_unit(self, u: Sequence[float]) -> np.ndarray:
        u = np.asarray(u, dtype=float)
        return self.centers + self.half_widths * u

    def contains(self, x: Sequence[float], tol: float = 1e-9) -> bool:
        u = self.to_unit(x)
        return bool(np.all(np.abs(u) <= 1.0 + tol))

    def to_dict(self) -> dict:
        return {"lower": list(self.lower), "upper": list(self.upper)}

    @classmethod
    def from_dict(cls, data: Mapping) -> "DomainBox":
        return cls(tuple(data["lower"]), tuple(data["upper"]))


class BasisSpec:
    """Index set and cached data for the tensor Legendre basis."""

    def __init__(self, dim: int, max_order: int):
        if dim < 1:
            raise ValueError("dim must be >= 1")
        if max_order < 0:
            raise ValueError("max_order must be >= 0")
        self.dim = int(dim)
        self.max_order = int(max_order)
        self.indices: list[tuple[int, ...]] = monomials_upto(dim, max_order)
        self.index_of = {idx: i for i, idx in enumerate(self.indices)}
        self._functions: list[MultiPoly] | None = None
        self._norm_factors = np.array(
            [math.sqrt((2 * k + 1) / 2.0) for k in range(max_order + 1)])

    @property
    def size(self) -> int:
        return len(self.indices)

    def __eq__(self, other):
        if isinstance(other, BasisSpec):
            return self.dim == other.dim and self.max_order == other.max_order
        return NotImplemented

    def __hash__(self):
        return hash((self.dim, self.max_order))

    def __repr__(self):
        return f"BasisSpec(dim={self.dim}, max_order={self.max_order}, size={self.size})"

    def basis_function(self, which: int | Sequence[int]) -> MultiPoly:
        """Basis function by flat position or by multi-index tuple."""
        if isinstance(which, (int, np.integer)):
            if not 0 <= which < self.size:
                raise ValueError(f"basis position {which} out of range")
            return self.basis_functions()[which]
        idx = tuple(int(k) for k in which)
        pos = self.index_of.get(idx)
        if pos is None:
            raise ValueError(f"multi-index {idx} is not in this basis")
        return self.basis_functions()[pos]

    def basis_functions(self) -> list[MultiPoly]:
        if self._functions is None:
            one_d = [legendre_1d_normalized(k) for k in range(self.max_order + 1)]
            funcs = []
            for idx in self.indices:
                terms: dict[tuple[int, ...], float] = {(0,) * self.dim: 1.0}
                for axis, k in enumerate(idx):
                    if k == 0:
                        terms = {e: c * math.sqrt(0.5) for e, c in terms.items()}
                        continue
                    new_terms: dict[tuple[int, ...], float] = {}
                    for (je,), jc in one_d[k]._terms.items():
                        for e, c in terms.items():
                            ne = list(e)
                            ne[axis] = je
                            new_terms[tuple(ne)] = new_terms.get(tuple(ne), 0.0) + jc * c
                    terms = new_terms
                funcs.append(MultiPoly(self.dim, terms, prune_tol=0.0))
            self._functions = funcs
        return self._functions

    def evaluate_all(self, u: Sequence[float]) -> np.ndarray:
        """Values of every basis function at one point of [-1, 1]^d."""
        u = np.asarray(u, dtype=float)
        if u.shape != (self.dim,):
            raise ValueError(f"point must have shape ({self.dim},)")
        vals_1d = np.empty((self.dim, self.max_order + 1))
        vals_1d[:, 0] = 1.0
        if self.max_order >= 1:
            vals_1d[:, 1] = u
        for k in range(2, self.max_order + 1):
            vals_1d[:, k] = ((2 * k - 1) * u * vals_1d[:, k - 1]
                             - (k - 1) * vals_1d[:, k - 2]) / k
        vals_1d *= self._norm_factors
        out = np.empty(self.size)
        for i, idx in enumerate(self.indices):
            v = 1.0
            for axis, k in enumerate(idx):
                v *= vals_1d[axis, k]
            out[i] = v
        return out

    def to_dict(self) -> dict:
        return {"dim": self.dim, "max_order": self.max_order}

    @classmethod
    def from_dict(cls, data: Mapping) -> "BasisSpec":
        return cls(int(data["dim"]), int(data["max_order"]))


def inner_product(p: MultiPoly, q: MultiPoly) -> float:
    """Exact L2 inner product over [-1, 1]^d with unit weight."""
    if p.num_vars != q.num_vars:
        raise ValueError("dimension mismatch")
    total = 0.0
    q_terms = list(q._terms.items())
    for ep, cp in p._terms.items():
        for eq, cq in q_terms:
            w = 1.0
            for a, b in zip(ep, eq):
                if (a + b) % 2:
                    w = 0.0
                    break
                w *= 2.0 / (a + b + 1)
            if w:
                total += cp * cq * w
    return total


@lru_cache(maxsize=None)
def _monomial_expansion(exps: tuple[int, ...]
                        ) -> tuple[tuple[tuple[int, ...], float], ...]:
    """Tensor-Legendre expansion of one monomial: pairs (index, weight)."""
    per_axis = [_power_in_normalized_legendre(e) for e in exps]
    out: list[tuple[tuple[int, ...], float]] = []
    stack = [(0, (), 1.0)]
    while stack:
        axis, idx, val = stack.pop()
        if axis == len(exps):
            out.append((idx, val))
            continue
        for j, w in per_axis[axis]:
            stack.append((axis + 1, idx + (j,), val * w))
    return tuple(out)


def expand_in_basis(p: MultiPoly, spec: BasisSpec
                    ) -> tuple[np.ndarray, dict[tuple[int, ...], float]]:
    """Exact expansion of ``p`` over normalized Legendre tensor functions.

    Returns the coefficient vector over ``spec``'s index set together with
    the overflow terms: coefficients on tensor functions outside the index
    set (total degree beyond ``max_order``).  The two parts together satisfy
    Parseval exactly, which is what makes truncation residuals cheap.
    """
    if p.num_vars != spec.dim:
        raise ValueError("dimension mismatch")
    inside = np.zeros(spec.size)
    overflow: dict[tuple[int, ...], float] = {}
    for exps, coef in p._terms.items():
        for idx, w in _monomial_expansion(exps):
            pos = spec.index_of.get(idx)
            if pos is not None:
                inside[pos] += coef * w
            else:
                overflow[idx] = overflow.get(idx, 0.0) + coef * w
    return inside, overflow


def project(p: MultiPoly, spec: BasisSpec) -> np.ndarray:
    """Galerkin coefficients of ``p`` over the basis (best L2 approximation).

    Terms beyond ``max_order`` are dropped; use :func:`expand_in_basis` when
    the truncation residual matters.
    """
    inside, _ = expand_in_basis(p, spec)
    return inside


def truncation_residual(p: MultiPoly, spec: BasisSpec) -> float:
    """L2 norm of the component of ``p`` orthogonal to the basis span.

    Zero (to roundoff) whenever deg(p) <= max_order; Parseval makes this an
    exact bookkeeping of the dropped tensor-function coefficients.
    """
    _, overflow = expand_in_basis(p, spec)
    return math.sqrt(sum(v * v for v in overflow.values()))


def monomial_to_legendre(p: MultiPoly, spec: BasisSpec) -> np.ndarray:
    """Exact basis coefficients of ``p``; degree overflow is an error."""
    if p.degree > spec.max_order:
        raise ValueError(
            f"polynomial degree {p.degree} exceeds basis order {spec.max_order}; "
            "enlarge the basis")
    inside, overflow = expand_in_basis(p, spec)
    if overflow:
        raise AssertionError("expansion overflow for in-range degree")
    return inside


def legendre_to_monomial(coeffs: Sequence[float], spec: BasisSpec) -> MultiPoly:
    """Rebuild the polynomial sum_i coeffs[i] * basis_function(i)."""
    coeffs = np.asarray(coeffs, dtype=float)
    if coeffs.shape != (spec.size,):
        raise ValueError(f"coefficient vector must have shape ({spec.size},)")
    terms: dict[tuple[int, ...], float] = {}
    for c, fn in zip(coeffs, spec.basis_functions()):
        if c == 0.0:
            continue
        for e, fc in fn._terms.items():
            terms[e] = terms.get(e, 0.0) + c * fc
    return MultiPoly(spec.dim, terms)
