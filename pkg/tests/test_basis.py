import math
from fractions import Fraction

import numpy as np
import pytest

from koopcontrol.basis import (BasisSpec, DomainBox, expand_in_basis,
                               inner_product, legendre_1d_normalized,
                               legendre_coefficients, legendre_to_monomial,
                               monomial_moment, monomial_to_legendre, project,
                               truncation_residual)
from koopcontrol.polynomial import MultiPoly, monomials_upto


def gauss_legendre_integral(p: MultiPoly, nodes=8) -> float:
    """Tensor Gauss-Legendre quadrature of p over [-1, 1]^d, unit weight."""
    x, w = np.polynomial.legendre.leggauss(nodes)
    d = p.num_vars
    total = 0.0
    for idx in np.ndindex(*([nodes] * d)):
        pt = np.array([x[i] for i in idx])
        wt = math.prod(w[i] for i in idx)
        total += wt * p.evaluate(pt)
    return total


def test_legendre_coefficients_first_rows():
    # rows of the recurrence in the monomial basis, exact rationals
    assert legendre_coefficients(0) == (Fraction(1),)
    assert legendre_coefficients(1) == (Fraction(0), Fraction(1))
    assert legendre_coefficients(2) == (Fraction(-1, 2), Fraction(0),
                                        Fraction(3, 2))
    assert legendre_coefficients(3) == (Fraction(0), Fraction(-3, 2),
                                        Fraction(0), Fraction(5, 2))


def test_monomial_moment_closed_form():
    # integral of x^k over [-1, 1]: 0 for odd k, 2/(k+1) for even k
    for k in range(0, 9):
        expected = 0.0 if k % 2 else 2.0 / (k + 1)
        assert monomial_moment(k) == pytest.approx(expected, abs=1e-15)


def test_normalized_legendre_unit_norm():
    for k in range(6):
        pk = legendre_1d_normalized(k)
        assert inner_product(pk, pk) == pytest.approx(1.0, abs=1e-12)


def test_normalized_legendre_orthogonal():
    for i in range(5):
        for j in range(i + 1, 6):
            v = inner_product(legendre_1d_normalized(i),
                              legendre_1d_normalized(j))
            assert abs(v) <= 1e-12


def test_gram_matrix_identity_dim3_order4():
    spec = BasisSpec(3, 4)
    funcs = spec.basis_functions()
    G = np.empty((spec.size, spec.size))
    for i, fi in enumerate(funcs):
        for j in range(i, spec.size):
            G[i, j] = G[j, i] = inner_product(fi, funcs[j])
    assert np.max(np.abs(G - np.eye(spec.size))) <= 1e-12


def test_inner_product_matches_quadrature(rng):
    # exact monomial integration against Gauss-Legendre on random pairs
    exps = monomials_upto(2, 3)
    for _ in range(100):
        pa = {exps[i]: float(rng.normal())
              for i in rng.choice(len(exps), 4, replace=False)}
        pb = {exps[i]: float(rng.normal())
              for i in rng.choice(len(exps), 4, replace=False)}
        a = MultiPoly(2, pa)
        b = MultiPoly(2, pb)
        assert inner_product(a, b) == pytest.approx(
            gauss_legendre_integral(a * b), abs=1e-12)


def test_basis_function_lookup():
    spec = BasisSpec(2, 3)
    # flat index and multi-index access agree
    for i, idx in enumerate(spec.indices):
        assert spec.basis_function(i) == spec.basis_function(idx)
    with pytest.raises(ValueError):
        spec.basis_function((9, 9))


def test_basis_indices_graded_and_sized():
    spec = BasisSpec(3, 2)
    assert spec.size == math.comb(5, 2)
    degs = [sum(i) for i in spec.indices]
    assert degs == sorted(degs)
    assert spec.index_of[spec.indices[4]] == 4


def test_evaluate_all_matches_symbolic(rng):
    spec = BasisSpec(3, 3)
    funcs = spec.basis_functions()
    for _ in range(5):
        u = rng.uniform(-1, 1, size=3)
        vals = spec.evaluate_all(u)
        direct = np.array([f.evaluate(u) for f in funcs])
        assert np.allclose(vals, direct, rtol=1e-12, atol=1e-12)


def test_expand_in_basis_round_trip(rng):
    spec = BasisSpec(2, 4)
    exps = monomials_upto(2, 4)
    p = MultiPoly(2, {exps[i]: float(rng.normal())
                      for i in rng.choice(len(exps), 6, replace=False)})
    coeffs, overflow = expand_in_basis(p, spec)
    assert not overflow
    back = legendre_to_monomial(coeffs, spec)
    assert (p - back).max_abs_coef() <= 1e-12


def test_monomial_to_legendre_matches_expansion():
    spec = BasisSpec(2, 3)
    p = MultiPoly(2, {(1, 1): 2.0, (0, 2): -1.0})
    assert np.allclose(monomial_to_legendre(p, spec),
                       expand_in_basis(p, spec)[0])


def test_project_is_best_approximation():
    # projecting x^4 onto order 3 then lifting back reproduces the
    # quadratic Legendre least-squares fit, orthogonal to the residual
    spec = BasisSpec(1, 3)
    p = MultiPoly(1, {(4,): 1.0})
    coeffs = project(p, spec)
    fit = legendre_to_monomial(coeffs, spec)
    residual = p - fit
    for f in spec.basis_functions():
        assert abs(inner_product(residual, f)) <= 1e-12


def test_truncation_residual_parseval():
    # x^4 = sum of Legendre components; the order-3 spec misses exactly
    # the order-4 component, whose norm the residual reports
    spec3 = BasisSpec(1, 3)
    spec4 = BasisSpec(1, 4)
    p = MultiPoly(1, {(4,): 1.0})
    full, _ = expand_in_basis(p, spec4)
    missed = math.sqrt(float(np.sum(full[spec3.size:] ** 2)))
    assert truncation_residual(p, spec3) == pytest.approx(missed, rel=1e-12)
    assert truncation_residual(p, spec4) <= 1e-14


def test_monomial_to_legendre_rejects_overflow_degree():
    spec = BasisSpec(1, 2)
    with pytest.raises(ValueError):
        monomial_to_legendre(MultiPoly(1, {(3,): 1.0}), spec)


def test_domain_box_round_trip(rng):
    box = DomainBox((-2.0, 0.0, -1.5), (4.0, 1.0, 0.5))
    for _ in range(10):
        x = rng.uniform(-1, 1, size=3)
        assert np.allclose(box.to_unit(box.from_unit(x)), x, atol=1e-14)
    assert np.allclose(box.centers, [1.0, 0.5, -0.5])
    assert np.allclose(box.half_widths, [3.0, 0.5, 1.0])


def test_domain_box_centered_and_contains():
    box = DomainBox.centered([1.0, 2.0])
    assert box.contains([0.5, -1.9])
    assert not box.contains([1.5, 0.0])
    assert box.dim == 2
    with pytest.raises(ValueError):
        DomainBox((0.0,), (0.0,))


def test_domain_box_serialization():
    box = DomainBox.centered([1.0, 3.0], centers=[0.5, -0.5])
    assert DomainBox.from_dict(box.to_dict()) == box
