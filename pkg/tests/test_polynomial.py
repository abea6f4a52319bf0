import json
import math

import numpy as np
import pytest

from koopcontrol.polynomial import (MultiPoly, PolyMap, TruncatedAlgebra,
                                    grlex_key, map_compose, monomials_upto)


def random_poly(rng, num_vars, degree, terms=8):
    exps = monomials_upto(num_vars, degree)
    picks = rng.choice(len(exps), size=min(terms, len(exps)), replace=False)
    return MultiPoly(num_vars,
                     {exps[i]: float(rng.normal()) for i in picks})


def assert_coef_close(p, q, tol=1e-12):
    """Equality up to float re-association in coefficient sums."""
    diff = (p - q).max_abs_coef()
    scale = max(1.0, p.max_abs_coef(), q.max_abs_coef())
    assert diff <= tol * scale, f"coefficient distance {diff:.3e}"


def test_evaluate_linear():
    p = MultiPoly(1, {(0,): 1.0, (1,): 2.0})
    assert p.evaluate([3.0]) == 7.0


def test_evaluate_zero_polynomial():
    z = MultiPoly.zero(3)
    assert z.evaluate([1.0, -2.0, 5.5]) == 0.0
    assert z.is_zero()
    assert z.degree == 0


def test_constant_and_variable_constructors():
    c = MultiPoly.constant(2, 4.5)
    assert c.evaluate([9.0, -9.0]) == 4.5
    x1 = MultiPoly.variable(2, 1)
    assert x1.evaluate([3.0, 7.0]) == 7.0
    assert x1.degree == 1


def test_ring_axioms(rng):
    for _ in range(10):
        a = random_poly(rng, 3, 3)
        b = random_poly(rng, 3, 3)
        c = random_poly(rng, 3, 2)
        assert a + b == b + a
        # products and regroupings match only up to float re-association
        assert_coef_close(a * b, b * a, tol=1e-15)
        assert_coef_close((a + b) + c, a + (b + c), tol=1e-15)
        assert_coef_close(a * (b + c), a * b + a * c)


def test_mul_against_pointwise(rng):
    a = random_poly(rng, 2, 3)
    b = random_poly(rng, 2, 2)
    prod = a * b
    for _ in range(20):
        z = rng.uniform(-1, 1, size=2)
        assert prod.evaluate(z) == pytest.approx(
            a.evaluate(z) * b.evaluate(z), rel=1e-12, abs=1e-12)


def test_pow_matches_repeated_mul(rng):
    a = random_poly(rng, 2, 2, terms=4)
    assert_coef_close(a ** 3, a * a * a)
    assert a ** 0 == MultiPoly.constant(2, 1.0)


def test_truncated_mul_drops_high_degrees(rng):
    a = random_poly(rng, 2, 3)
    b = random_poly(rng, 2, 3)
    t = a.mul(b, trunc_order=3)
    full = a * b
    assert t == full.truncate(3)
    assert t.degree <= 3


def test_derivative_finite_difference(rng):
    # degree-4 polynomials, central differences at 50 random points
    p = random_poly(rng, 3, 4, terms=12)
    h = 1e-5
    for _ in range(50):
        z = rng.uniform(-1, 1, size=3)
        for var in range(3):
            zp = z.copy(); zp[var] += h
            zm = z.copy(); zm[var] -= h
            fd = (p.evaluate(zp) - p.evaluate(zm)) / (2 * h)
            exact = p.derivative(var).evaluate(z)
            assert fd == pytest.approx(exact, rel=1e-6, abs=1e-6)


def test_derivative_drops_degree():
    p = MultiPoly(2, {(3, 1): 2.0})
    d = p.derivative(0)
    assert d == MultiPoly(2, {(2, 1): 6.0})
    assert p.derivative(1).derivative(1).is_zero()


def test_grlex_iteration_order():
    p = MultiPoly(2, {(0, 2): 1.0, (1, 0): 1.0, (0, 0): 1.0, (2, 0): 1.0,
                      (1, 1): 1.0})
    seen = [e for e, _ in p.items()]
    assert seen == sorted(seen, key=grlex_key)
    # graded: total degree ascends
    degs = [sum(e) for e in seen]
    assert degs == sorted(degs)


def test_prune_relative_threshold():
    p = MultiPoly(1, {(0,): 1.0, (1,): 1e-20}, prune_tol=0.0)
    assert len(p) == 2
    assert len(p.prune(1e-14)) == 1
    # pruning is relative to the largest coefficient
    q = MultiPoly(1, {(0,): 1e-20, (1,): 3e-20}, prune_tol=0.0).prune(1e-14)
    assert len(q) == 2


def test_serialization_round_trip(rng):
    p = random_poly(rng, 4, 3)
    q = MultiPoly.from_json(p.to_json())
    assert p == q
    # serialized term order is the deterministic iteration order
    d = p.to_dict()
    assert [tuple(t["exp"]) for t in d["terms"]] == [e for e, _ in p.items()]


def test_compose_scalar_into_map():
    # p(x) = x^2 composed with x = 1 + y; no truncation order keeps the
    # exact composition even with a constant part in the inner map
    p = MultiPoly(1, {(2,): 1.0})
    inner = PolyMap([MultiPoly(1, {(0,): 1.0, (1,): 1.0})])
    out = p.compose(inner)
    assert out == MultiPoly(1, {(0,): 1.0, (1,): 2.0, (2,): 1.0})


def test_compose_truncated_origin_preserving():
    # truncation semantics are exact for maps fixing the origin:
    # (y + y^2)^2 = y^2 + 2y^3 + y^4 -> order 3 keeps y^2 + 2y^3
    p = MultiPoly(1, {(2,): 1.0})
    inner = PolyMap([MultiPoly(1, {(1,): 1.0, (2,): 1.0})])
    assert p.compose(inner, trunc_order=3) == \
        MultiPoly(1, {(2,): 1.0, (3,): 2.0})


def test_polymap_evaluate_and_identity():
    pm = PolyMap.identity(3)
    z = np.array([0.3, -0.7, 2.0])
    assert np.allclose(pm.evaluate(z), z)
    assert pm.is_origin_preserving()


def test_polymap_linear_constructor():
    A = np.array([[1.0, 2.0], [0.0, -1.0]])
    b = np.array([0.5, 0.0])
    pm = PolyMap.linear(A, b)
    z = np.array([1.0, 1.0])
    assert np.allclose(pm.evaluate(z), A @ z + b)
    b_out, A_out = pm.linear_part()
    assert np.allclose(A_out, A)
    assert np.allclose(b_out, b)
    assert not pm.is_origin_preserving()


def test_polymap_jacobian(rng):
    pm = PolyMap([random_poly(rng, 2, 3), random_poly(rng, 2, 2)])
    J = pm.jacobian()
    z = rng.uniform(-1, 1, size=2)
    h = 1e-6
    for i in range(2):
        for j in range(2):
            zp = z.copy(); zp[j] += h
            zm = z.copy(); zm[j] -= h
            fd = (pm.components[i].evaluate(zp)
                  - pm.components[i].evaluate(zm)) / (2 * h)
            assert J[i][j].evaluate(z) == pytest.approx(fd, rel=1e-5, abs=1e-7)


def test_map_compose_pointwise(rng):
    outer = PolyMap([random_poly(rng, 2, 2), random_poly(rng, 2, 2)])
    inner = PolyMap([random_poly(rng, 2, 2, terms=4),
                     random_poly(rng, 2, 2, terms=4)])
    comp = map_compose(outer, inner, trunc_order=4)
    for _ in range(10):
        z = rng.uniform(-0.5, 0.5, size=2)
        direct = outer.evaluate(inner.evaluate(z))
        assert np.allclose(comp.evaluate(z), direct, rtol=1e-10, atol=1e-10)


def test_map_compose_truncates():
    sq = MultiPoly(1, {(2,): 1.0})
    outer = PolyMap([sq])
    inner = PolyMap([MultiPoly(1, {(1,): 1.0, (2,): 1.0})])
    comp = map_compose(outer, inner, trunc_order=3)
    # (y + y^2)^2 = y^2 + 2y^3 + y^4, truncated at 3
    assert comp.components[0] == MultiPoly(1, {(2,): 1.0, (3,): 2.0})


def test_compiled_matches_evaluate(rng):
    pm = PolyMap([random_poly(rng, 3, 3), random_poly(rng, 3, 2),
                  random_poly(rng, 3, 3)])
    fn = pm.compiled()
    for _ in range(5):
        z = rng.uniform(-1, 1, size=3)
        assert np.allclose(fn(z), pm.evaluate(z), rtol=1e-13, atol=1e-13)


def test_truncated_algebra_round_trip(rng):
    alg = TruncatedAlgebra(2, 3)
    p = random_poly(rng, 2, 3)
    v = alg.to_vector(p)
    assert alg.from_vector(v, prune_tol=0.0) == p


def test_truncated_algebra_multiply(rng):
    alg = TruncatedAlgebra(2, 4)
    a = random_poly(rng, 2, 2)
    b = random_poly(rng, 2, 2)
    va = alg.to_vector(a)
    vb = alg.to_vector(b)
    prod = alg.from_vector(alg.multiply(va, vb), prune_tol=0.0)
    assert_coef_close(prod, (a * b).truncate(4))


def test_dimension_mismatch_raises():
    a = MultiPoly(2, {(1, 0): 1.0})
    b = MultiPoly(3, {(1, 0, 0): 1.0})
    with pytest.raises(ValueError):
        a + b
    with pytest.raises(ValueError):
        a.evaluate([1.0])
    with pytest.raises(ValueError):
        PolyMap([])


def test_monomials_upto_counts():
    # C(n + d, d) monomials up to degree d
    assert len(monomials_upto(3, 4)) == math.comb(7, 4)
    assert monomials_upto(2, 1) == [(0, 0), (0, 1), (1, 0)] or \
           monomials_upto(2, 1) == [(0, 0), (1, 0), (0, 1)]


def test_json_floats_survive_round_trip():
    p = MultiPoly(1, {(3,): 0.1 + 0.2})
    q = MultiPoly.from_dict(json.loads(p.to_json()))
    assert q.coefficient((3,)) == p.coefficient((3,))
