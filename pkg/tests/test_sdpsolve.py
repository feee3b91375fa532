import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sosconvex.grambasis import sos_blocks
from sosconvex.polycore import Polynomial, parse_polynomial, random_polynomial
from sosconvex.sdpsolve import (
    SdpBuilder,
    SdpProblem,
    interior_separator,
    project_onto_sos,
    random_sdp,
    solve,
    sos_feasibility,
)

NAMES = ["x1", "x2", "x3"]
MOTZKIN = parse_polynomial("x1^4*x2^2 + x1^2*x2^4 - 3*x1^2*x2^2*x3^2 + x3^6", NAMES)


def _psd(M, tol=1e-7):
    return np.linalg.eigvalsh(M).min() >= -tol * max(1.0, np.abs(M).max())


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 10**6), st.lists(st.integers(1, 5), min_size=1, max_size=3))
def test_random_sdps_reach_optimality(seed, dims):
    rng = np.random.default_rng(seed)
    m = int(rng.integers(1, sum(d * (d + 1) // 2 for d in dims) + 1))
    prob, _ = random_sdp(rng, dims, m)
    sol = solve(prob)
    assert sol.optimal, sol.message
    assert sol.gap <= 1e-8 and sol.primal_residual <= 1e-8 and sol.dual_residual <= 1e-8
    assert all(_psd(X) for X in sol.X) and all(_psd(S) for S in sol.S)
    assert abs(sol.primal_objective - sol.dual_objective) <= 1e-6 * (1 + abs(sol.primal_objective))


def test_solver_is_deterministic():
    prob, _ = random_sdp(np.random.default_rng(3), [4, 3], 7)
    a, b = solve(prob), solve(prob)
    assert a.iterations == b.iterations
    assert np.array_equal(a.y, b.y)


def test_minimum_eigenvalue_program():
    C = np.array([[2.0, 1.0, 0.0], [1.0, 3.0, 1.0], [0.0, 1.0, 4.0]])
    bld = SdpBuilder([3])
    bld.add_row({(0, i, i): 1.0 for i in range(3)}, None, 1.0)
    bld.C[0][:] = C
    sol = solve(bld.build())
    assert sol.optimal
    assert sol.primal_objective == pytest.approx(np.linalg.eigvalsh(C).min(), abs=1e-7)


def test_free_variables():
    # min u  s.t.  X11 - u = 1,  X >= 0   ->  u = -1
    bld = SdpBuilder([1], n_free=1)
    bld.add_row({(0, 0, 0): 1.0}, {0: -1.0}, 1.0)
    bld.f[0] = 1.0
    sol = solve(bld.build())
    assert sol.optimal
    assert sol.u[0] == pytest.approx(-1.0, abs=1e-7)


def test_primal_infeasible_detected():
    bld = SdpBuilder([2])
    bld.add_row({(0, 0, 0): 1.0, (0, 1, 1): 1.0}, None, -1.0)
    assert solve(bld.build()).status == "primal_infeasible"


def test_dual_infeasible_detected():
    # min -X11 s.t. X12 = 0: unbounded below
    bld = SdpBuilder([2])
    bld.add_row({(0, 0, 1): 1.0}, None, 0.0)
    bld.C[0][0, 0] = -1.0
    assert solve(bld.build()).status == "dual_infeasible"


def test_redundant_rows_are_presolved():
    bld = SdpBuilder([2])
    bld.add_row({(0, 0, 0): 1.0}, None, 1.0)
    bld.add_row({(0, 0, 0): 2.0}, None, 2.0)
    bld.add_row({(0, 1, 1): 1.0}, None, 1.0)
    bld.C[0][:] = np.eye(2)
    sol = solve(bld.build())
    assert sol.optimal and sol.primal_objective == pytest.approx(2.0, abs=1e-7)
    assert sol.y.shape == (3,)


def test_problem_validation():
    with pytest.raises(ValueError):
        SdpProblem([2], [np.eye(3)], [np.zeros((1, 2, 2))], [1.0])
    with pytest.raises(ValueError):
        SdpProblem([2], [np.array([[0.0, 1.0], [0.0, 0.0]])], [np.zeros((1, 2, 2))], [1.0])


def test_sparse_text_export():
    prob, _ = random_sdp(np.random.default_rng(1), [2], 2)
    text = prob.to_sparse_text()
    assert text.splitlines()[1] == "blocks 2"
    assert len(text.splitlines()) == 4 + 3 + 2 * 3


def test_sos_feasibility_verdicts():
    assert sos_feasibility(MOTZKIN, sos_blocks(MOTZKIN)).t == pytest.approx(-3.0, abs=1e-6)
    sq = parse_polynomial("x1^4 + 2*x1^2*x2^2 + x2^4 + x3^4", NAMES)
    res = sos_feasibility(sq, sos_blocks(sq))
    assert res.is_sos and res.t > 0


def test_dual_of_motzkin_is_a_separator():
    res = sos_feasibility(MOTZKIN, sos_blocks(MOTZKIN))
    assert res.dual_pairing(MOTZKIN) < -1e-3
    assert all(np.linalg.eigvalsh(M).min() > -1e-7 for M in res.moment_matrix())


def test_projection_hyperplane_separates_motzkin():
    proj = project_onto_sos(MOTZKIN)
    assert proj.distance > 1e-3
    h = dict(zip(proj.rows, proj.hyperplane))
    assert sum(h.get(m, 0.0) * float(c) for m, c in MOTZKIN.terms.items()) < 0
    rng = np.random.default_rng(5)
    for _ in range(100):
        q = Polynomial.zero(3)
        for _ in range(3):
            g = random_polynomial(rng, 3, 3, 4, homogeneous=True)
            q = q + g * g
        assert set(q.terms) <= set(h)
        val = sum(h.get(m, 0.0) * float(c) for m, c in q.terms.items())
        assert val >= -1e-6 * max(1.0, float(max(abs(c) for c in q.terms.values())))


def test_projection_of_sos_is_itself():
    sq = parse_polynomial("x1^6 + x2^6 + x3^6", NAMES)
    proj = project_onto_sos(sq)
    assert proj.distance < 1e-6
    assert not proj.hyperplane.any()


def test_interior_separator_is_strictly_inside():
    sep = interior_separator(MOTZKIN, sos_blocks(MOTZKIN), pairing_goal=-0.5)
    assert sep.solution.optimal
    assert sep.min_moment_eig > 0
    assert sep.pairing <= -0.5 + 1e-7
