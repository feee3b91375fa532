from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings

from sosconvex.polycore import (
    ParseError,
    PolyMatrix,
    Polynomial,
    PolynomialError,
    all_monomials,
    dehomogenize,
    differentiate,
    evaluate,
    exact_divide,
    format_polynomial,
    hessian,
    homogenize,
    parse_polynomial,
    polynomial_from_dict,
    polynomial_to_dict,
    quadratic_form_in_y,
    random_polynomial,
    sum_of_squares_multiplier,
)
from strategies import points, polynomials

NAMES = ["x1", "x2", "x3"]


@given(polynomials(), polynomials(), points())
def test_ring_operations_match_evaluation(p, q, v):
    assert evaluate(p + q, v) == evaluate(p, v) + evaluate(q, v)
    assert evaluate(p * q, v) == evaluate(p, v) * evaluate(q, v)
    assert evaluate(p - q, v) == evaluate(p, v) - evaluate(q, v)


@given(polynomials())
def test_text_round_trip(p):
    assert parse_polynomial(format_polynomial(p), NAMES) == p


@given(polynomials())
def test_document_round_trip(p):
    assert polynomial_from_dict(polynomial_to_dict(p)) == p


@given(polynomials(), polynomials())
def test_product_rule(p, q):
    for i in range(3):
        assert differentiate(p * q, i) == differentiate(p, i) * q + p * differentiate(q, i)


@given(polynomials(max_deg=4))
def test_mixed_partials_commute(p):
    H = hessian(p)
    assert H.is_symmetric()
    for i in range(3):
        for j in range(3):
            for k in range(3):
                assert differentiate(H[i, j], k) == differentiate(H[i, k], j)


@settings(max_examples=40)
@given(polynomials(max_terms=4), polynomials(max_terms=3))
def test_exact_divide_inverts_multiplication(p, q):
    if q.is_zero():
        return
    assert exact_divide(p * q, q) == p


def test_exact_divide_rejects_remainder():
    x1 = Polynomial.variable(2, 0)
    x2 = Polynomial.variable(2, 1)
    with pytest.raises(PolynomialError):
        exact_divide(x1 * x1 + 1, x2)


@given(polynomials(max_deg=3), points())
def test_homogenize_then_dehomogenize(p, v):
    if p.is_zero():
        return
    h = homogenize(p)
    assert h.is_form()
    assert dehomogenize(h, 3) == p


def test_parse_examples():
    p = parse_polynomial("3/2*x1^2*x2 - 0.25*x3 + 7", NAMES)
    assert p.coeff((2, 1, 0)) == Fraction(3, 2)
    assert p.coeff((0, 0, 1)) == Fraction(-1, 4)
    assert p.coeff((0, 0, 0)) == 7
    assert parse_polynomial("x2*x1*x1", NAMES) == parse_polynomial("x1^2*x2", NAMES)
    assert parse_polynomial("x1 + x3").nvars == 3


@pytest.mark.parametrize("text", ["x1 +* x2", "x1 ^ ", "2*y", "x1 $ 3", "(x1 + x2"])
def test_parse_errors(text):
    with pytest.raises(ParseError):
        parse_polynomial(text, NAMES)


def test_mismatched_nvars_rejected():
    with pytest.raises(PolynomialError):
        Polynomial.variable(2, 0) + Polynomial.variable(3, 0)


def test_zero_coefficients_dropped_and_degrees():
    p = Polynomial(2, {(1, 0): 1, (0, 1): 0, (2, 2): Fraction(0)})
    assert len(p) == 1
    assert p.degree == 1
    assert Polynomial.zero(2).degree is None


def test_hessian_of_quartic():
    p = parse_polynomial("x1^4 + x1^2*x2^2", ["x1", "x2"])
    H = hessian(p)
    assert H[0, 0] == parse_polynomial("12*x1^2 + 2*x2^2", ["x1", "x2"])
    assert H[0, 1] == parse_polynomial("4*x1*x2", ["x1", "x2"])


def test_quadratic_form_layout():
    x = [Polynomial.variable(2, i) for i in range(2)]
    P = PolyMatrix([[x[0] * x[0], x[0] * x[1]], [x[0] * x[1], x[1] * x[1]]])
    q = quadratic_form_in_y(P)
    assert q.nvars == 4
    # y^T P y = (x1 y1 + x2 y2)^2
    y = [Polynomial.variable(4, 2), Polynomial.variable(4, 3)]
    xx = [Polynomial.variable(4, 0), Polynomial.variable(4, 1)]
    assert q == (xx[0] * y[0] + xx[1] * y[1]) ** 2


def test_monomial_enumeration_count():
    from math import comb

    for n in range(1, 5):
        for d in range(6):
            mons = all_monomials(n, d)
            assert len(mons) == comb(n + d - 1, d) == len(set(mons))


def test_multiplier():
    m = sum_of_squares_multiplier(3, 2)
    assert m == parse_polynomial("x1^2 + x2^2 + x3^2", NAMES) ** 2
    assert sum_of_squares_multiplier(2, 1, constant=1) == parse_polynomial("1 + x1^2 + x2^2", ["x1", "x2"])


def test_polymatrix_product_and_symmetry():
    rng = np.random.default_rng(0)
    M = PolyMatrix([[random_polynomial(rng, 2, 2, 3) for _ in range(2)] for _ in range(3)], symmetric=False)
    P = M.transpose().matmul(M, symmetric=True)
    assert P.shape == (2, 2)
    assert P.is_symmetric()
    with pytest.raises(Exception):
        PolyMatrix([[Polynomial.variable(2, 0), Polynomial.zero(2)], [Polynomial.variable(2, 1), Polynomial.zero(2)]])
