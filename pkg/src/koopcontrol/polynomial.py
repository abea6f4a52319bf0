"""Sparse multivariate polynomials and truncated polynomial maps.

Polynomials are stored as dictionaries mapping exponent tuples to float
coefficients.  Terms are kept in graded lexicographic order whenever they
are enumerated (serialization, iteration, printing): lower total degree
first, and within a degree block the exponent tuples sorted so that earlier
variables carry higher powers first, e.g. for two variables

    (0, 0), (1, 0), (0, 1), (2, 0), (1, 1), (0, 2), ...

Construction prunes exact zeros always and, by default, any coefficient
smaller than ``PRUNE_TOL`` relative to the largest coefficient magnitude.
Arithmetic operators are exact (they drop only exact zeros) so ring
identities hold to the last bit even across wildly different magnitudes;
relative pruning happens on explicit construction, on ``prune()`` and when
dense engine results are converted back to sparse form.
"""

from __future__ import annotations

import itertools
import json
import math
from typing import Callable, Iterable, Iterator, Mapping, Sequence

import numpy as np

PRUNE_TOL = 1e-14


def grlex_key(exponents: Sequence[int]) -> tuple:
    """Sort key realizing the graded lexicographic order used throughout."""
    return (sum(exponents), tuple(-e for e in exponents))


def monomials_upto(num_vars: int, order: int) -> list[tuple[int, ...]]:
    """All exponent tuples with total degree <= order, in graded-lex order."""
    out = []
    for deg in range(order + 1):
        out.extend(_monomials_of_degree(num_vars, deg))
    return out


def _monomials_of_degree(num_vars: int, deg: int) -> list[tuple[int, ...]]:
    if num_vars == 1:
        return [(deg,)]
    out = []
    for first in range(deg, -1, -1):
        for rest in _monomials_of_degree(num_vars - 1, deg - first):
            out.append((first,) + rest)
    return out


class MultiPoly:
    """Sparse polynomial in ``num_vars`` real variables."""

    __slots__ = ("num_vars", "_terms")

    def __init__(self, num_vars: int,
                 terms: Mapping[tuple[int, ...], float] | None = None,
                 prune_tol: float = PRUNE_TOL):
        if num_vars < 1:
            raise ValueError("num_vars must be >= 1")
        self.num_vars = int(num_vars)
        cleaned: dict[tuple[int, ...], float] = {}
        if terms:
            for exps, coef in terms.items():
                exps = tuple(int(e) for e in exps)
                if len(exps) != self.num_vars:
                    raise ValueError(
                        f"exponent tuple {exps} does not match num_vars={num_vars}")
                if any(e < 0 for e in exps):
                    raise ValueError(f"negative exponent in {exps}")
                c = float(coef)
                if c != 0.0:
                    cleaned[exps] = cleaned.get(exps, 0.0) + c
            if cleaned and prune_tol > 0.0:
                biggest = max(abs(c) for c in cleaned.values())
                cut = prune_tol * biggest
                cleaned = {e: c for e, c in cleaned.items()
                           if c != 0.0 and abs(c) >= cut}
            else:
                cleaned = {e: c for e, c in cleaned.items() if c != 0.0}
        self._terms = cleaned

    # -- constructors ------------------------------------------------------

    @classmethod
    def zero(cls, num_vars: int) -> "MultiPoly":
        return cls(num_vars)

    @classmethod
    def constant(cls, num_vars: int, value: float) -> "MultiPoly":
        return cls(num_vars, {(0,) * num_vars: value})

    @classmethod
    def variable(cls, num_vars: int, index: int) -> "MultiPoly":
        if not 0 <= index < num_vars:
            raise ValueError(f"variable index {index} out of range")
        exps = [0] * num_vars
        exps[index] = 1
        return cls(num_vars, {tuple(exps): 1.0})

    # -- basic queries -----------------------------------------------------

    @property
    def terms(self) -> dict[tuple[int, ...], float]:
        return dict(self._terms)

    def items(self) -> Iterator[tuple[tuple[int, ...], float]]:
        """Terms in graded-lex order."""
        for exps in sorted(self._terms, key=grlex_key):
            yield exps, self._terms[exps]

    def coefficient(self, exps: Sequence[int]) -> float:
        return self._terms.get(tuple(exps), 0.0)

    @property
    def degree(self) -> int:
        """Total degree; the zero polynomial has degree 0 by convention."""
        if not self._terms:
            return 0
        return max(sum(e) for e in self._terms)

    def is_zero(self) -> bool:
        return not self._terms

    def max_abs_coef(self) -> float:
        if not self._terms:
            return 0.0
        return max(abs(c) for c in self._terms.values())

    def __len__(self) -> int:
        return len(self._terms)

    def __eq__(self, other) -> bool:
        if isinstance(other, MultiPoly):
            return self.num_vars == other.num_vars and self._terms == other._terms
        return NotImplemented

    def __hash__(self):
        return hash((self.num_vars, tuple(sorted(self._terms.items()))))

    def __repr__(self) -> str:
        n = len(self._terms)
        return f"MultiPoly(num_vars={self.num_vars}, terms={n}, degree={self.degree})"

    # -- arithmetic --------------------------------------------------------

    def _check_compatible(self, other: "MultiPoly") -> None:
        if self.num_vars != other.num_vars:
            raise ValueError(
                f"mixing polynomials in {self.num_vars} and {other.num_vars} variables")

    def __add__(self, other):
        if isinstance(other, (int, float)):
            other = MultiPoly.constant(self.num_vars, other)
        if not isinstance(other, MultiPoly):
            return NotImplemented
        self._check_compatible(other)
        merged = dict(self._terms)
        for exps, coef in other._terms.items():
            merged[exps] = merged.get(exps, 0.0) + coef
        return MultiPoly(self.num_vars, merged, prune_tol=0.0)

    __radd__ = __add__

    def __neg__(self):
        return MultiPoly(self.num_vars,
                         {e: -c for e, c in self._terms.items()}, prune_tol=0.0)

    def __sub__(self, other):
        if isinstance(other, (int, float)):
            other = MultiPoly.constant(self.num_vars, other)
        if not isinstance(other, MultiPoly):
            return NotImplemented
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if isinstance(other, (int, float)):
            if other == 0:
                return MultiPoly.zero(self.num_vars)
            return MultiPoly(self.num_vars,
                             {e: c * other for e, c in self._terms.items()},
                             prune_tol=0.0)
        if not isinstance(other, MultiPoly):
            return NotImplemented
        self._check_compatible(other)
        prod: dict[tuple[int, ...], float] = {}
        for ea, ca in self._terms.items():
            for eb, cb in other._terms.items():
                key = tuple(a + b for a, b in zip(ea, eb))
                prod[key] = prod.get(key, 0.0) + ca * cb
        return MultiPoly(self.num_vars, prod, prune_tol=0.0)

    __rmul__ = __mul__

    def mul(self, other: "MultiPoly", trunc_order: int | None = None) -> "MultiPoly":
        """Product, optionally dropping terms above ``trunc_order`` on the fly."""
        if trunc_order is None:
            return self * other
        self._check_compatible(other)
        prod: dict[tuple[int, ...], float] = {}
        for ea, ca in self._terms.items():
            da = sum(ea)
            if da > trunc_order:
                continue
            for eb, cb in other._terms.items():
                if da + sum(eb) > trunc_order:
                    continue
                key = tuple(a + b for a, b in zip(ea, eb))
                prod[key] = prod.get(key, 0.0) + ca * cb
        return MultiPoly(self.num_vars, prod, prune_tol=0.0)

    def __pow__(self, exponent: int):
        if not isinstance(exponent, int) or exponent < 0:
            raise ValueError("only non-negative integer powers are supported")
        result = MultiPoly.constant(self.num_vars, 1.0)
        base = self
        e = exponent
        while e:
            if e & 1:
                result = result * base
            base = base * base if e > 1 else base
            e >>= 1
        return result

    def derivative(self, var: int) -> "MultiPoly":
        """Partial derivative with respect to variable ``var``."""
        if not 0 <= var < self.num_vars:
            raise ValueError(f"variable index {var} out of range")
        out: dict[tuple[int, ...], float] = {}
        for exps, coef in self._terms.items():
            e = exps[var]
            if e == 0:
                continue
            new = list(exps)
            new[var] = e - 1
            key = tuple(new)
            out[key] = out.get(key, 0.0) + coef * e
        return MultiPoly(self.num_vars, out, prune_tol=0.0)

    def truncate(self, order: int) -> "MultiPoly":
        """Drop all terms of total degree greater than ``order``."""
        if order < 0:
            return MultiPoly.zero(self.num_vars)
        kept = {e: c for e, c in self._terms.items() if sum(e) <= order}
        return MultiPoly(self.num_vars, kept, prune_tol=0.0)

    def evaluate(self, point: Sequence[float]) -> float:
        x = np.asarray(point, dtype=float)
        if x.shape != (self.num_vars,):
            raise ValueError(
                f"point of length {x.shape} does not match num_vars={self.num_vars}")
        # Summation runs in graded-lex order so the result is deterministic
        # for a given term multiset, independent of insertion history.
        total = 0.0
        for exps, coef in self.items():
            term = coef
            for xi, e in zip(x, exps):
                if e:
                    term *= xi ** e
            total += term
        return total

    def __call__(self, point: Sequence[float]) -> float:
        return self.evaluate(point)

    def compose(self, inner: "PolyMap", trunc_order: int | None = None) -> "MultiPoly":
        """Substitute ``inner``'s components for this polynomial's variables."""
        outer = PolyMap([self])
        return map_compose(outer, inner, trunc_order).components[0]

    def prune(self, tol: float = PRUNE_TOL) -> "MultiPoly":
        return MultiPoly(self.num_vars, self._terms, prune_tol=tol)

    # -- serialization -----------------------------------------------------

    def to_dict(self) -> dict:
        return {
            "num_vars": self.num_vars,
            "terms": [{"exp": list(e), "coef": c} for e, c in self.items()],
        }

    @classmethod
    def from_dict(cls, data: Mapping) -> "MultiPoly":
        terms = {tuple(t["exp"]): t["coef"] for t in data["terms"]}
        return cls(int(data["num_vars"]), terms, prune_tol=0.0)

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_json(cls, text: str) -> "MultiPoly":
        return cls.from_dict(json.loads(text))


class PolyMap:
    """A tuple of polynomials sharing one input space: R^n -> R^m."""

    __slots__ = ("components", "num_vars_in", "_compiled")

    def __init__(self, components: Sequence[MultiPoly]):
        components = list(components)
        if not components:
            raise ValueError("a map needs at least one component")
        n = components[0].num_vars
        for p in components:
            if p.num_vars != n:
                raise ValueError("all components must share one input dimension")
        self.components = components
        self.num_vars_in = n
        self._compiled: Callable | None = None

    @property
    def num_outputs(self) -> int:
        return len(self.components)

    @classmethod
    def identity(cls, num_vars: int) -> "PolyMap":
        return cls([MultiPoly.variable(num_vars, i) for i in range(num_vars)])

    @classmethod
    def linear(cls, matrix: np.ndarray, constant: np.ndarray | None = None) -> "PolyMap":
        """Affine map x -> A x + b from an (m, n) matrix."""
        A = np.asarray(matrix, dtype=float)
        if A.ndim != 2:
            raise ValueError("matrix must be 2-D")
        m, n = A.shape
        b = np.zeros(m) if constant is None else np.asarray(constant, dtype=float)
        comps = []
        for i in range(m):
            terms: dict[tuple[int, ...], float] = {}
            if b[i] != 0.0:
                terms[(0,) * n] = b[i]
            for j in range(n):
                if A[i, j] != 0.0:
                    e = [0] * n
                    e[j] = 1
                    terms[tuple(e)] = A[i, j]
            comps.append(MultiPoly(n, terms, prune_tol=0.0))
        return cls(comps)

    def max_degree(self) -> int:
        return max(p.degree for p in self.components)

    def evaluate(self, point: Sequence[float]) -> np.ndarray:
        return np.array([p.evaluate(point) for p in self.components])

    def __call__(self, point: Sequence[float]) -> np.ndarray:
        return self.evaluate(point)

    def truncate(self, order: int) -> "PolyMap":
        return PolyMap([p.truncate(order) for p in self.components])

    def jacobian(self) -> list[list[MultiPoly]]:
        return [[p.derivative(j) for j in range(self.num_vars_in)]
                for p in self.components]

    def is_origin_preserving(self) -> bool:
        """True when every component has zero constant term."""
        origin = (0,) * self.num_vars_in
        return all(p.coefficient(origin) == 0.0 for p in self.components)

    def linear_part(self) -> tuple[np.ndarray, np.ndarray]:
        """Constant vector b and matrix A of the degree <= 1 part."""
        n = self.num_vars_in
        m = self.num_outputs
        A = np.zeros((m, n))
        b = np.zeros(m)
        unit = [tuple(1 if j == i else 0 for j in range(n)) for i in range(n)]
        for i, p in enumerate(self.components):
            b[i] = p.coefficient((0,) * n)
            for j in range(n):
                A[i, j] = p.coefficient(unit[j])
        return b, A

    def compiled(self) -> Callable[[np.ndarray], np.ndarray]:
        """Vectorized evaluator suitable for tight integration loops.

        Returns a function mapping a state vector (n,) to outputs (m,).
        """
        if self._compiled is not None:
            return self._compiled
        rows = []
        exps = []
        coefs = []
        for i, p in enumerate(self.components):
            for e, c in p._terms.items():
                rows.append(i)
                exps.append(e)
                coefs.append(c)
        n_out = self.num_outputs
        if not rows:
            self._compiled = lambda x: np.zeros(n_out)
            return self._compiled
        E = np.array(exps, dtype=np.intp)
        C = np.array(coefs, dtype=float)
        R = np.array(rows, dtype=np.intp)
        max_deg = int(E.max())
        n_in = self.num_vars_in
        cols = np.arange(n_in)

        def rhs(x: np.ndarray) -> np.ndarray:
            powers = np.ones((max_deg + 1, n_in))
            for k in range(1, max_deg + 1):
                powers[k] = powers[k - 1] * x
            mono = powers[E, cols].prod(axis=1)
            return np.bincount(R, weights=mono * C, minlength=n_out)

        self._compiled = rhs
        return rhs

    def to_dict(self) -> dict:
        return {
            "num_vars_in": self.num_vars_in,
            "components": [p.to_dict() for p in self.components],
        }

    @classmethod
    def from_dict(cls, data: Mapping) -> "PolyMap":
        comps = [MultiPoly.from_dict(d) for d in data["components"]]
        pm = cls(comps)
        if pm.num_vars_in != int(data["num_vars_in"]):
            raise ValueError("component dimension disagrees with num_vars_in")
        return pm

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_json(cls, text: str) -> "PolyMap":
        return cls.from_dict(json.loads(text))


class TruncatedAlgebra:
    """Dense coefficient arithmetic for polynomials of bounded total degree.

    Vectors are indexed by the graded-lex monomial list of ``monomials_upto``.
    Instances are cached per (num_vars, order); the multiplication table is
    built on first use.
    """

    _cache: dict[tuple[int, int], "TruncatedAlgebra"] = {}

    def __new__(cls, num_vars: int, order: int):
        key = (int(num_vars), int(order))
        inst = cls._cache.get(key)
        if inst is None:
            inst = super().__new__(cls)
            inst._init(*key)
            cls._cache[key] = inst
        return inst

    def _init(self, num_vars: int, order: int) -> None:
        self.num_vars = num_vars
        self.order = order
        self.monomials = monomials_upto(num_vars, order)
        self.index = {m: i for i, m in enumerate(self.monomials)}
        self.size = len(self.monomials)
        self.degrees = np.array([sum(m) for m in self.monomials])
        self._table: tuple[np.ndarray, np.ndarray, np.ndarray] | None = None

    def _mult_table(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        if self._table is None:
            I, J, K = [], [], []
            for i, mi in enumerate(self.monomials):
                di = self.degrees[i]
                for j, mj in enumerate(self.monomials):
                    if di + self.degrees[j] > self.order:
                        continue
                    I.append(i)
                    J.append(j)
                    K.append(self.index[tuple(a + b for a, b in zip(mi, mj))])
            self._table = (np.array(I, dtype=np.intp),
                           np.array(J, dtype=np.intp),
                           np.array(K, dtype=np.intp))
        return self._table

    def to_vector(self, poly: MultiPoly) -> np.ndarray:
        if poly.num_vars != self.num_vars:
            raise ValueError("polynomial dimension does not match algebra")
        v = np.zeros(self.size)
        for exps, coef in poly._terms.items():
            idx = self.index.get(exps)
            if idx is None:
                if sum(exps) <= self.order:
                    raise AssertionError("monomial missing from algebra index")
                continue
            v[idx] = coef
        return v

    def from_vector(self, v: np.ndarray, prune_tol: float = PRUNE_TOL) -> MultiPoly:
        terms = {m: v[i] for i, m in enumerate(self.monomials) if v[i] != 0.0}
        return MultiPoly(self.num_vars, terms, prune_tol=prune_tol)

    def multiply(self, a: np.ndarray, b: np.ndarray) -> np.ndarray:
        I, J, K = self._mult_table()
        out = np.zeros(self.size)
        np.add.at(out, K, a[I] * b[J])
        return out

    def compose_vectors(self, coeff_polys: Sequence[MultiPoly],
                        inner_vectors: Sequence[np.ndarray],
                        inner_algebra: "TruncatedAlgebra") -> list[np.ndarray]:
        """Evaluate each polynomial at a tuple of algebra elements.

        ``coeff_polys`` live in ``len(inner_vectors)`` variables; the result
        vectors live in ``inner_algebra``.  Monomials of the outer space are
        built incrementally so each costs one truncated multiply.
        """
        n_outer = len(inner_vectors)
        outer = TruncatedAlgebra(n_outer, self.order)
        mono_vecs: dict[tuple[int, ...], np.ndarray] = {}
        one = np.zeros(inner_algebra.size)
        one[0] = 1.0
        mono_vecs[(0,) * n_outer] = one
        for exps in outer.monomials[1:]:
            var = next(i for i, e in enumerate(exps) if e > 0)
            parent = list(exps)
            parent[var] -= 1
            mono_vecs[exps] = inner_algebra.multiply(
                mono_vecs[tuple(parent)], inner_vectors[var])
        results = []
        for p in coeff_polys:
            if p.num_vars != n_outer:
                raise ValueError("outer polynomial dimension mismatch")
            acc = np.zeros(inner_algebra.size)
            for exps, coef in p._terms.items():
                if sum(exps) > self.order:
                    continue
                acc += coef * mono_vecs[exps]
            results.append(acc)
        return results


def map_compose(outer: PolyMap, inner: PolyMap,
                trunc_order: int | None = None) -> PolyMap:
    """Composition outer(inner(x)), truncated to total degree ``trunc_order``.

    Jet-transport semantics: terms of ``outer`` beyond ``trunc_order`` are
    discarded before substitution, and every intermediate product is
    truncated at ``trunc_order``.  When ``inner`` has no constant part this
    equals the truncation of the exact composition.  With no truncation
    order the result keeps every term the exact composition produces (the
    order defaults to the product of the two degrees, which bounds the
    composed degree).
    """
    if outer.num_vars_in != inner.num_outputs:
        raise ValueError(
            f"outer expects {outer.num_vars_in} inputs, inner provides "
            f"{inner.num_outputs} outputs")
    if trunc_order is None:
        od = max(outer.max_degree(), 0)
        idg = max(inner.max_degree(), 1)
        trunc_order = max(od * idg, 1)
    algebra = TruncatedAlgebra(inner.num_vars_in, trunc_order)
    inner_vecs = [algebra.to_vector(p.truncate(trunc_order))
                  for p in inner.components]
    helper = TruncatedAlgebra(outer.num_vars_in, trunc_order)
    out_vecs = helper.compose_vectors(outer.components, inner_vecs, algebra)
    return PolyMap([algebra.from_vector(v) for v in out_vecs])
