from fractions import Fraction
from itertools import permutations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sosconvex.convexcert import (
    SeparationCertificate,
    bareiss_det,
    cauchy_binet_det,
    certify_sos,
    find_separation,
    is_sos_convex,
    is_sos_matrix,
    is_valid_hessian,
    load_separation_certificate,
    moment_matrix,
    paper_fixtures,
    principal_minors,
    verify_separation,
)
from sosconvex.polycore import PolyMatrix, Polynomial, hessian, parse_polynomial, random_polynomial
from strategies import polynomials

NAMES = ["x1", "x2", "x3"]


def leibniz_det(rows):
    n = len(rows)
    total = None
    for perm in permutations(range(n)):
        sign = -1 if sum(perm[i] > perm[j] for i in range(n) for j in range(i + 1, n)) % 2 else 1
        term = rows[0][perm[0]]
        for i in range(1, n):
            term = term * rows[i][perm[i]]
        term = term if sign > 0 else -term
        total = term if total is None else total + term
    return total


@given(polynomials(max_deg=4))
def test_hessians_are_valid(p):
    assert is_valid_hessian(hessian(p)).valid


def test_constant_matrix_is_valid_hessian():
    c = [[Polynomial.constant(2, v) for v in row] for row in [[1, 2], [2, 5]]]
    assert is_valid_hessian(PolyMatrix(c)).valid


def test_choi_violation():
    C = paper_fixtures()["choi"]
    chk = is_valid_hessian(C)
    assert not chk.valid
    i, j, k, lhs, rhs = next(v for v in chk.violations if v[:3] == (0, 0, 2))
    assert lhs.is_zero() and rhs == -Polynomial.variable(3, 2)
    assert "dx3" in chk.describe(limit=len(chk.violations))


@settings(max_examples=25, deadline=None)
@given(st.integers(1, 3), st.integers(0, 10**6))
def test_bareiss_matches_leibniz(n, seed):
    rng = np.random.default_rng(seed)
    rows = [[random_polynomial(rng, 2, 2, 2) for _ in range(n)] for _ in range(n)]
    assert bareiss_det(rows) == leibniz_det(rows)


@settings(max_examples=15, deadline=None)
@given(st.integers(1, 3), st.integers(1, 3), st.integers(0, 10**6))
def test_cauchy_binet(k, m, seed):
    rng = np.random.default_rng(seed)
    M = PolyMatrix([[random_polynomial(rng, 2, 2, 2) for _ in range(m)] for _ in range(k)], symmetric=False)
    P = M.transpose().matmul(M, symmetric=True)
    assert cauchy_binet_det(M) == bareiss_det([list(r) for r in P.rows()])


def test_principal_minor_order():
    C = paper_fixtures()["choi"]
    idx = [i for i, _ in principal_minors(C)]
    assert idx == [(0,), (1,), (2,), (0, 1), (0, 2), (1, 2), (0, 1, 2)]
    assert len(principal_minors(C, order=2)) == 3


def test_mtm_is_sos_matrix():
    rng = np.random.default_rng(4)
    M = PolyMatrix([[random_polynomial(rng, 2, 1, 2, homogeneous=True) for _ in range(2)] for _ in range(2)],
                   symmetric=False)
    P = M.transpose().matmul(M, symmetric=True)
    chk = is_sos_matrix(P)
    assert chk.is_sos and chk.certificate is not None


def test_separation_fixture_and_tampering():
    cert = load_separation_certificate()
    rep = verify_separation(cert)
    assert rep.passed and rep.pairing == Fraction(-2237, 250)
    again = SeparationCertificate.from_dict(cert.to_dict())
    assert verify_separation(again).passed
    # dropping a pairing monomial breaks basis completeness
    short = SeparationCertificate(cert.subspace, cert.c, type(cert.z)(3, cert.z.monomials[:-1]), cert.target)
    assert not verify_separation(short).passed
    # pushing a diagonal moment negative breaks PSD-ness
    bad_c = list(cert.c)
    bad_c[0] = -bad_c[0] - 1
    assert not verify_separation(SeparationCertificate(cert.subspace, bad_c, cert.z, cert.target)).passed


def test_moment_matrix_symmetric():
    cert = load_separation_certificate()
    M = moment_matrix(cert.c, cert.subspace, cert.z)
    assert all(M[i][j] == M[j][i] for i in range(len(M)) for j in range(len(M)))


def test_find_separation_motzkin():
    motzkin = paper_fixtures()["motzkin_form"]
    sep = find_separation(motzkin)
    assert sep is not None and verify_separation(sep).passed
    assert find_separation(parse_polynomial("x1^2 + x2^2", NAMES)) is None


def test_certify_sos_verdicts():
    fx = paper_fixtures()
    assert certify_sos(fx["motzkin_form"]).verdict == "not_sos"
    assert certify_sos(fx["motzkin_form"], multiplier_r=1).verdict == "sos"
    # dehomogenized Motzkin with the (1 + |x|^2) multiplier
    assert certify_sos(fx["motzkin"], multiplier_r=1).verdict == "sos"
    # odd-degree target cannot be a sum of squares
    assert certify_sos(parse_polynomial("x1^3", NAMES)).verdict == "not_sos"


@pytest.mark.parametrize("text,verdict", [
    ("x1^4 + x2^4", "sos-convex"),
    ("x1^2 + x2^2 + x1*x2", "sos-convex"),
    ("x1^2 - x2^2", "not-sos-convex"),
    ("x1^4 - x1^2*x2^2 + x2^4", "not-sos-convex"),
])
def test_sos_convexity_verdicts(text, verdict):
    p = parse_polynomial(text, ["x1", "x2"])
    rep = is_sos_convex(p)
    assert rep.verdict == verdict
    if rep.sos_witness is not None:
        from sosconvex.grambasis import verify_certificate

        assert verify_certificate(rep.sos_witness).passed
    if rep.negative_witness is not None:
        assert verify_separation(rep.negative_witness).passed


def test_main_example():
    rep = is_sos_convex(paper_fixtures()["p"])
    assert rep.verdict == "convex-not-sos-convex"
    assert rep.convex_r == 1
    assert rep.negative_source == "principal minor (1)"
    assert "verdict: convex-not-sos-convex" in rep.summary()


def test_fixture_shape():
    fx = paper_fixtures()
    assert len(fx["p"]) == 14 and fx["p"].coeff((8, 0, 0)) == 32
    assert [m for m in fx["S"]] == list(fx["separation"].subspace)
    assert fx["appendix_cert"].multiplier_r == 1


def test_newton_filter_keeps_fixture_systems_solvable():
    from sosconvex.grambasis import gram_system, sos_blocks
    from sosconvex.sdpsolve import sos_feasibility

    fx = paper_fixtures()
    targets = [fx["appendix_cert"].multiplied_target(), fx["H11"], fx["motzkin_form"], fx["p"]]
    for t in targets:
        blocks = sos_blocks(t)
        gram_system(t, blocks)
        assert np.isfinite(sos_feasibility(t, blocks).t)


def test_exact_and_numeric_separation_agree():
    from sosconvex.grambasis import sos_blocks
    from sosconvex.sdpsolve import sos_feasibility

    fx = paper_fixtures()
    for cert in (fx["separation"], find_separation(fx["motzkin_form"])):
        assert verify_separation(cert).passed
        assert not sos_feasibility(cert.target, sos_blocks(cert.target)).is_sos
