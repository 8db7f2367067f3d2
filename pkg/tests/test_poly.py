import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from clfsyn.poly import (GramMatrix, Monomial, Polynomial, gram_to_poly,
                         monomial_basis, to_gram)


def P(d, n):
    return Polynomial.from_exp_dict(d, n)


def test_eval_simple():
    # x1^2 + x2 at (2, 1)
    p = P({(2, 0): 1.0, (0, 1): 1.0}, 2)
    assert p.eval([2.0, 1.0]) == 5.0


def test_eval_zero_polynomial():
    p = Polynomial.zero(3)
    assert p.eval([1.0, -2.0, 3.0]) == 0.0


def test_eval_origin_kills_quadratic_basis():
    # any linear combination of degree-2 monomials vanishes at the origin
    coeffs = {(2, 0, 0, 0): 1.60, (0, 2, 0, 0): 1.22, (0, 0, 2, 0): 0.44,
              (0, 0, 0, 2): 1.69, (1, 1, 0, 0): 0.069, (1, 0, 1, 0): -0.68,
              (1, 0, 0, 1): -1.85, (0, 1, 1, 0): 0.31, (0, 1, 0, 1): -0.28,
              (0, 0, 1, 1): 0.8}
    p = P(coeffs, 4)
    assert p.eval(np.zeros(4)) == 0.0


def test_eval_dimension_mismatch():
    p = P({(1, 0): 1.0}, 2)
    with pytest.raises(ValueError):
        p.eval([1.0])


def test_grad_power_rule():
    p = P({(2, 1): 1.0}, 2)  # x1^2 x2
    gx, gy = p.grad()
    assert gx == P({(1, 1): 2.0}, 2)
    assert gy == P({(2, 0): 1.0}, 2)


def test_grad_constant_is_zero():
    p = Polynomial.constant(7.0, 3)
    assert all(g.is_zero() for g in p.grad())


def test_grad_sphere():
    p = P({(2, 0): 1.0, (0, 2): 1.0}, 2)
    gx, gy = p.grad()
    assert gx == P({(1, 0): 2.0}, 2)
    assert gy == P({(0, 1): 2.0}, 2)


def test_monomial_basis_small():
    basis = monomial_basis(2, 1)
    assert [repr(m) for m in basis] == ["1", "x1", "x2"]


def test_monomial_basis_counts():
    assert len(monomial_basis(2, 2)) == 6
    assert len(monomial_basis(4, 4)) == math.comb(8, 4)  # 70


def test_monomial_basis_grlex_order():
    basis = monomial_basis(2, 2)
    degs = [m.degree for m in basis]
    assert degs == sorted(degs)
    exps = [m.exponents(2) for m in basis]
    assert exps[3:] == [(2, 0), (1, 1), (0, 2)]


def test_to_gram_worked_example():
    # x1^2 - 1.5 x1 x2 + x2^2 + x1 - 2 over [1, x1, x2]
    p = P({(2, 0): 1.0, (1, 1): -1.5, (0, 2): 1.0, (1, 0): 1.0, (0, 0): -2.0}, 2)
    G = to_gram(p, 1)
    expected = np.array([[-2.0, 0.5, 0.0],
                         [0.5, 1.0, -0.75],
                         [0.0, -0.75, 1.0]])
    assert np.array_equal(G.entries, expected)


def test_to_gram_constant():
    G = to_gram(Polynomial.constant(1.0, 2), 1)
    expected = np.zeros((3, 3))
    expected[0, 0] = 1.0
    assert np.array_equal(G.entries, expected)


def test_to_gram_degree_overflow():
    p = P({(4, 0): 1.0}, 2)
    with pytest.raises(ValueError):
        to_gram(p, 1)


def test_to_gram_eval_identity():
    rng = np.random.default_rng(7)
    basis = monomial_basis(2, 4)
    for _ in range(20):
        terms = {m: rng.normal() for m in rng.choice(len(basis), 5, replace=False)
                 .astype(int)}
        p = Polynomial({basis[k]: v for k, v in terms.items()}, 2)
        G = to_gram(p, 2)
        mvals = None
        for x in rng.uniform(-1, 1, size=(100, 2)):
            mvec = np.array([m.eval(x) for m in G.basis])
            lhs = p.eval(x)
            rhs = mvec @ G.entries @ mvec
            assert abs(lhs - rhs) <= 1e-9 * max(1.0, abs(lhs))


def test_to_gram_round_trip():
    rng = np.random.default_rng(3)
    basis = monomial_basis(3, 4)
    for _ in range(10):
        idx = rng.choice(len(basis), 6, replace=False)
        p = Polynomial({basis[int(k)]: rng.normal() for k in idx}, 3)
        G = to_gram(p, 2)
        q = gram_to_poly(G, 3)
        assert set(q.terms) == set(p.terms)
        for m in p.terms:
            assert q.terms[m] == pytest.approx(p.terms[m], abs=0.0)


coef = st.floats(-10, 10, allow_nan=False).filter(lambda v: abs(v) > 1e-6)
exponents = st.tuples(st.integers(0, 3), st.integers(0, 3))


@st.composite
def polynomials(draw, nvars=2):
    nterms = draw(st.integers(0, 6))
    terms = {}
    for _ in range(nterms):
        e = draw(exponents)
        terms[e] = draw(coef)
    return Polynomial.from_exp_dict(terms, nvars)


@given(polynomials(), polynomials(), st.tuples(st.floats(-2, 2), st.floats(-2, 2)))
@settings(max_examples=200, deadline=None)
def test_arithmetic_matches_pointwise(p, q, x):
    x = np.asarray(x)
    ref_sum = p.eval(x) + q.eval(x)
    ref_prod = p.eval(x) * q.eval(x)
    assert (p + q).eval(x) == pytest.approx(ref_sum, rel=1e-9, abs=1e-9)
    assert (p * q).eval(x) == pytest.approx(ref_prod, rel=1e-9, abs=1e-7)


@given(polynomials())
@settings(max_examples=100, deadline=None)
def test_grad_matches_finite_differences(p):
    x = np.array([0.37, -0.59])
    g = np.array([gi.eval(x) for gi in p.grad()])
    for h in (1e-4, 1e-5):
        for i in range(2):
            dx = np.zeros(2)
            dx[i] = h
            fd = (p.eval(x + dx) - p.eval(x - dx)) / (2 * h)
            assert abs(fd - g[i]) <= 1e-4 * max(1.0, abs(g[i])) + 1e-4


def test_grad_directional_second_order():
    p = P({(3, 0): 1.0, (1, 2): -2.0, (0, 1): 0.5}, 2)
    x = np.array([0.4, -0.7])
    d = np.array([0.6, 0.8])
    g = np.array([gi.eval(x) for gi in p.grad()])
    errs = []
    for h in (1e-2, 5e-3, 2.5e-3):
        err = abs(g @ (h * d) - (p.eval(x + h * d) - p.eval(x)))
        errs.append(err / h ** 2)
    # O(h^2) remainder: the h^-2-normalized error stays bounded
    assert max(errs) <= 10 * min(errs) + 1e-9


def test_eval_many_matches_eval():
    rng = np.random.default_rng(0)
    p = P({(2, 1): 1.5, (0, 3): -0.25, (1, 0): 2.0}, 2)
    X = rng.uniform(-2, 2, size=(50, 2))
    batch = p.eval_many(X)
    for xk, vk in zip(X, batch):
        assert vk == pytest.approx(p.eval(xk), rel=1e-12, abs=1e-12)


def test_monomial_never_stores_zero_powers():
    m = Monomial(((0, 2), (1, 0), (2, 1)))
    assert m.powers == ((0, 2), (2, 1))
    assert m.degree == 3


def test_gram_matrix_requires_symmetry():
    basis = tuple(monomial_basis(1, 1))
    with pytest.raises(ValueError):
        GramMatrix(basis, np.array([[0.0, 1.0], [0.0, 0.0]]))
