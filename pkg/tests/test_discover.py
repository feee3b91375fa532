import json
from fractions import Fraction

import numpy as np
import pytest

from sosconvex.convexcert import paper_fixtures, verify_separation
from sosconvex.discover import (
    AlreadySosError,
    PostprocessError,
    SearchConfig,
    SearchError,
    build_search_program,
    calibrate_trace,
    default_mu,
    embed_functional,
    evaluate_candidate,
    hyperplane_from_infeasibility,
    hyperplane_from_projection,
    pair,
    postprocess_rationalize,
    search_counterexample,
    search_psd_not_sos,
)
from sosconvex.grambasis import verify_certificate
from sosconvex.polycore import Polynomial, all_monomials, parse_polynomial, random_polynomial
from sosconvex.sdpsolve import solve

NAMES = ["x1", "x2", "x3"]
SEXTICS = all_monomials(3, 6)


@pytest.fixture(scope="module")
def motzkin():
    return paper_fixtures()["motzkin_form"]


@pytest.fixture(scope="module")
def random_sos_sextics():
    rng = np.random.default_rng(17)
    out = []
    for _ in range(100):
        q = Polynomial.zero(3)
        for _ in range(int(rng.integers(1, 4))):
            g = random_polynomial(rng, 3, 3, int(rng.integers(1, 6)), homogeneous=True)
            q = q + g * g
        out.append(q)
    return out


@pytest.mark.parametrize("make", [hyperplane_from_projection, hyperplane_from_infeasibility])
def test_hyperplanes_separate_motzkin(make, motzkin, random_sos_sextics):
    mu = make(motzkin)
    assert float(pair(mu, SEXTICS, motzkin)) < -1e-3
    for q in random_sos_sextics:
        scale = float(max(abs(c) for c in q.terms.values()))
        assert float(pair(mu, SEXTICS, q)) >= -1e-7 * scale


def test_hyperplane_of_sos_form_raises():
    with pytest.raises(AlreadySosError):
        hyperplane_from_projection(parse_polynomial("x1^6 + x2^6 + x3^6", NAMES))
    with pytest.raises(AlreadySosError):
        hyperplane_from_infeasibility(parse_polynomial("x1^6 + x2^6 + x3^6", NAMES))


def test_config_json_round_trip():
    cfg = SearchConfig(strictness_margin=2.5, dual_mu=[Fraction(1, 3)] * 28, max_r=3)
    again = SearchConfig.from_json(json.dumps(cfg.to_dict()))
    assert again == cfg


@pytest.mark.parametrize("kwargs", [
    {"degree": 7}, {"mode": "other"}, {"strictness_margin": 0}, {"target_minor": (1, 2)}, {"target_minor": (4,)},
])
def test_config_validation(kwargs):
    with pytest.raises(ValueError):
        SearchConfig(**kwargs)


def test_unknown_config_key():
    with pytest.raises(ValueError):
        SearchConfig.from_dict({"nvars": 3, "colour": "red"})


def test_default_mu_needs_sextic_functional():
    with pytest.raises(SearchError):
        default_mu(SearchConfig(degree=6))


def test_worked_example_satisfies_search_constraints():
    fx = paper_fixtures()
    sep = fx["separation"]
    cfg = SearchConfig(strictness_margin=1.0)
    mu = embed_functional(sep.c, sep.subspace, cfg.functional_monomials())
    chk = evaluate_candidate(cfg, fx["p"], mu)
    assert chk.pairing == Fraction(-2237, 250)
    assert chk.feasible


def _solve_with_margin(margin):
    cfg = SearchConfig(strictness_margin=margin)
    mu = default_mu(cfg)
    a, _ = calibrate_trace(cfg, mu)
    prog = build_search_program(cfg, mu, gram_trace=2 * margin / a)
    sol = solve(prog.problem)
    assert sol.optimal
    return cfg, mu, prog, prog.coefficients(sol)


def test_feasible_set_is_convex():
    cfg, mu, prog, c1 = _solve_with_margin(1.0)
    _, _, _, c2 = _solve_with_margin(3.0)
    for lam in (0.25, 0.5, 0.75):
        p = prog.polynomial(lam * c1 + (1 - lam) * c2)
        chk = evaluate_candidate(cfg, p, mu)
        assert chk.feasible, (lam, chk)


def test_search_program_shape():
    cfg = SearchConfig()
    prog = build_search_program(cfg, default_mu(cfg), gram_trace=1.0)
    assert len(prog.coeff_monomials) == 45
    assert prog.block_sizes[:4] == [12, 12, 12, 9]


def test_default_search_certifies():
    res = search_counterexample()
    assert res.success
    assert res.certified.verdict == "convex-not-sos-convex"
    assert verify_separation(res.certified.negative_witness).passed
    assert verify_certificate(res.certified.convexity_witness).passed
    assert all(c.denominator == 1 for c in res.final.terms.values())
    assert "SUCCESS" in res.transcript()


def test_zero_functional_is_infeasible():
    res = search_counterexample(SearchConfig(dual_mu=[0] * 28))
    assert not res.success and res.infeasible


def test_psd_not_sos_search():
    res = search_psd_not_sos(SearchConfig(degree=6, mode="psd"))
    assert res.success
    assert res.form.is_form() and res.form.degree == 6
    assert verify_certificate(res.psd_certificate).passed
    assert verify_separation(res.separation).passed


def test_postprocess_rejects_zero():
    with pytest.raises(PostprocessError):
        postprocess_rationalize(Polynomial.zero(3))


def test_postprocess_perturbed_example():
    p = paper_fixtures()["p"]
    nudged = p.scale(Fraction(999, 1000))
    form, report, _ = postprocess_rationalize(nudged)
    assert report.verdict == "convex-not-sos-convex"
    assert all(c.denominator == 1 for c in form.terms.values())


def test_postprocess_rejects_sos_convex_input():
    with pytest.raises(PostprocessError):
        postprocess_rationalize(parse_polynomial("x1^8 + x2^8 + x3^8", NAMES), scale_search=False,
                                magnitudes=(100,))
