from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sosconvex.grambasis import (
    GramBlock,
    GramCertificate,
    GramSystemError,
    MonomialBasis,
    certificate_from_blocks,
    expand_gram,
    extract_sos_decomposition,
    gram_system,
    in_convex_hull,
    newton_filter,
    half_degree_basis,
    rational_psd_check,
    rationalize_gram,
    sos_blocks,
    sum_weighted_squares,
    verify_certificate,
)
from sosconvex.polycore import Polynomial, parse_polynomial
from sosconvex.sdpsolve import sos_feasibility
from strategies import polynomials

NAMES = ["x1", "x2", "x3"]
MOTZKIN = parse_polynomial("x1^4*x2^2 + x1^2*x2^4 - 3*x1^2*x2^2*x3^2 + x3^6", NAMES)


def int_matrices(n):
    return st.lists(st.lists(st.integers(-4, 4), min_size=n, max_size=n), min_size=n, max_size=n)


@given(st.integers(1, 5).flatmap(int_matrices))
def test_gram_products_are_psd(G):
    n = len(G)
    Q = [[sum(Fraction(G[k][i] * G[k][j]) for k in range(n)) for j in range(n)] for i in range(n)]
    res = rational_psd_check(Q)
    assert res.is_psd
    rank = np.linalg.matrix_rank(np.array(G, dtype=float))
    assert res.rank == rank
    assert res.is_pd == (rank == n)


def test_psd_check_verdicts():
    assert rational_psd_check([[2, 1], [1, 2]]).verdict == "pd"
    assert rational_psd_check([[1, 1], [1, 1]]).verdict == "psd"
    bad = rational_psd_check([[1, 2], [2, 1]])
    assert bad.verdict == "indefinite" and bad.failure
    assert rational_psd_check([[0, 1], [1, 0]]).verdict == "indefinite"
    with pytest.raises(ValueError):
        rational_psd_check([[1, 2], [3, 1]])


def test_ldl_reconstructs_matrix():
    Q = [[Fraction(v) for v in row] for row in [[4, 2, -2], [2, 5, 1], [-2, 1, 6]]]
    res = rational_psd_check(Q)
    n = 3
    P = [[Q[res.perm[i]][res.perm[j]] for j in range(n)] for i in range(n)]
    LDLt = [[sum(res.L[i][k] * res.D[k] * res.L[j][k] for k in range(n)) for j in range(n)] for i in range(n)]
    assert LDLt == P


def test_convex_hull_membership():
    pts = [(0, 0), (4, 0), (0, 4)]
    assert in_convex_hull((1, 1), pts)
    assert in_convex_hull((2, 2), pts)
    assert not in_convex_hull((3, 3), pts)


def test_newton_filter_motzkin():
    basis = newton_filter(MOTZKIN, half_degree_basis(MOTZKIN))
    assert set(basis) == {(2, 1, 0), (1, 2, 0), (1, 1, 1), (0, 0, 3)}


@settings(max_examples=30, deadline=None)
@given(polynomials(nvars=3, max_deg=2, max_terms=4))
def test_square_basis_covers_sos(q):
    """Newton filtering never drops a monomial needed for an explicit square."""
    if q.is_zero():
        return
    target = q * q
    blocks = sos_blocks(target)
    covered = {m for b in blocks for m in b}
    # leading and trailing monomials of q must survive
    mons = sorted(q.terms)
    assert mons[0] in covered and mons[-1] in covered


def test_gram_system_unreachable_monomial():
    p = parse_polynomial("x1*x2", NAMES)
    with pytest.raises(GramSystemError):
        gram_system(p, [MonomialBasis(3, ((1, 0, 0),))])


def test_certificate_round_trip_and_tamper():
    target = parse_polynomial("x1^2 + 2*x1*x2 + 2*x2^2", NAMES)
    basis = MonomialBasis(3, ((1, 0, 0), (0, 1, 0)))
    cert = certificate_from_blocks(target, [basis], [[[1, 1], [1, 2]]])
    assert verify_certificate(cert).passed
    again = GramCertificate.from_dict(cert.to_dict())
    assert again.target == target and verify_certificate(again).passed
    bad = certificate_from_blocks(target, [basis], [[[1, 1], [1, 3]]])
    rep = verify_certificate(bad)
    assert not rep.passed and rep.mismatch[0] == (0, 2, 0)
    assert "FAIL" in rep.summary()


def test_gram_block_validation():
    with pytest.raises(ValueError):
        GramBlock(MonomialBasis(1, ((1,),)), [[1, 0]])
    with pytest.raises(ValueError):
        GramBlock(MonomialBasis(1, ((1,), (0,))), [[1, 2], [3, 1]])


def test_sos_decomposition_matches_target():
    target = parse_polynomial("x1^4 + x1^2*x2^2 + x2^4 + x3^4", NAMES)
    blocks = sos_blocks(target)
    res = sos_feasibility(target, blocks)
    mats = rationalize_gram(res.gram, res.system)
    cert = certificate_from_blocks(target, blocks, mats)
    assert verify_certificate(cert).passed
    decomp = extract_sos_decomposition(cert)
    assert sum_weighted_squares(decomp, 3) == target
    assert all(d >= 0 for blk in decomp for d, _ in blk)


def test_rationalize_boundary_case():
    # (x1^2 - x2^2)^2 has a singular Gram matrix; the kernel must survive rounding
    target = parse_polynomial("x1^4 - 2*x1^2*x2^2 + x2^4", NAMES)
    blocks = sos_blocks(target)
    res = sos_feasibility(target, blocks)
    mats = rationalize_gram(res.gram, res.system)
    assert verify_certificate(certificate_from_blocks(target, blocks, mats)).passed


def test_expand_gram_with_multiplier():
    target = parse_polynomial("x1^2", NAMES)
    basis = MonomialBasis(3, ((2, 0, 0), (1, 1, 0), (1, 0, 1)))
    Q = [[1, 0, 0], [0, 1, 0], [0, 0, 1]]
    cert = certificate_from_blocks(target, [basis], [Q], r=1)
    assert expand_gram(cert) == cert.multiplied_target()
    assert verify_certificate(cert).passed
