"""End-to-end reproduction of the worked example, as a list of named checks."""

from __future__ import annotations

import json
import random
import time
from dataclasses import dataclass
from fractions import Fraction
from importlib import resources
from pathlib import Path

from .convexcert import (
    EXAMPLE_P,
    SeparationCertificate,
    certify_sos,
    is_sos_convex,
    is_sos_matrix,
    is_valid_hessian,
    paper_fixtures,
    principal_minors,
    verify_separation,
)
from .grambasis import GramCertificate, verify_certificate
from .polycore import dehomogenize, differentiate, evaluate, hessian, parse_polynomial, quadratic_form_in_y

H11_VECTOR = [1792, 3540, 1200, 300, -516, -420, 6, -32, 48]
FIXTURES = ("multiplier_certificate.json", "separation_certificate.json")


class MissingFixture(FileNotFoundError):
    pass


@dataclass
class Check:
    name: str
    passed: bool
    detail: str
    seconds: float


def default_data_dir() -> Path:
    return Path(str(resources.files("sosconvex").joinpath("data")))


def load_fixture(data_dir: Path, name: str) -> dict:
    path = Path(data_dir) / name
    if not path.is_file():
        raise MissingFixture(f"missing fixture: {path}")
    return json.loads(path.read_text())


def _timed(name, fn):
    t0 = time.perf_counter()
    try:
        ok, detail = fn()
    except Exception as exc:  # a crashing step is a failed step
        ok, detail = False, f"{type(exc).__name__}: {exc}"
    return Check(name, bool(ok), detail, time.perf_counter() - t0)


def run_checks(data_dir: Path | None = None, tol: float = 1e-8, seed: int = 0,
               samples: int = 200) -> list[Check]:
    data_dir = Path(data_dir) if data_dir else default_data_dir()
    multiplier_cert = GramCertificate.from_dict(load_fixture(data_dir, FIXTURES[0]))
    separation = SeparationCertificate.from_dict(load_fixture(data_dir, FIXTURES[1]))
    fx = paper_fixtures()
    p = fx["p"]
    checks = []

    def motzkin():
        chk = certify_sos(fx["motzkin_form"], tol=tol)
        t = chk.numeric.t if chk.numeric else float("nan")
        extra = " (exact separator)" if chk.separation else ""
        return chk.verdict == "not_sos" and t <= -1e-4, f"verdict {chk.verdict}, optimal t = {t:.4g}{extra}"

    def motzkin_times():
        chk = certify_sos(fx["motzkin_form"], multiplier_r=1, tol=tol)
        ok = chk.is_sos and verify_certificate(chk.certificate).passed
        return ok, f"verdict {chk.verdict}; rational certificate " + ("PASS" if ok else "missing or FAIL")

    def choi():
        C = fx["choi"]
        hv = is_valid_hessian(C)
        witness = next((v for v in hv.violations if v[:3] == (0, 0, 2)), None)
        ok_h = not hv.valid and witness is not None and witness[3].is_zero() and str(witness[4]) == "-x3"
        sm = is_sos_matrix(C, 0, tol=tol)
        minors = [certify_sos(m, tol=tol) for _, m in principal_minors(C)]
        nsos = sum(m.is_sos for m in minors)
        ok = ok_h and sm.verdict == "not_sos" and nsos == 7
        return ok, (f"valid Hessian: {hv.valid} (dC11/dx3 = 0, dC13/dx1 = -x3); "
                    f"sos-matrix: {sm.verdict}; SOS principal minors: {nsos}/7")

    def multiplier_identity():
        if multiplier_cert.target != fixture_target(p):
            return False, "fixture target differs from y^T H y of the example"
        rep = verify_certificate(multiplier_cert)
        pd = all(b.is_pd for b in rep.blocks)
        sizes = [len(b.basis) for b in multiplier_cert.blocks]
        return rep.passed and pd, f"identity exact: {rep.identity_ok}; blocks {sizes} all PD: {pd}"

    def separation_cert():
        rep = verify_separation(separation)
        ok = rep.passed and rep.pairing == Fraction(-2237, 250) and rep.moment.is_pd
        return ok, f"pairing {rep.pairing} = {float(rep.pairing)}; moment matrix {rep.moment.verdict}"

    def h11():
        H11 = differentiate(differentiate(p, 0), 0)
        vec = [H11.coeff(m) for m in separation.subspace]
        ok = vec == H11_VECTOR and H11 == separation.target and len(H11) == 9
        return ok, f"coefficients {[int(v) for v in vec]}"

    def example_verdict():
        rep = is_sos_convex(p, tol=tol)
        return rep.verdict == "convex-not-sos-convex" and rep.convex_r == 1, (
            f"{rep.verdict}; convexity r = {rep.convex_r}; negative witness on {rep.negative_source}")

    def p_sos():
        chk = certify_sos(p, tol=tol)
        return chk.is_sos, f"verdict {chk.verdict}"

    def p_positive():
        rng = random.Random(seed)
        worst = None
        for _ in range(samples):
            v = [Fraction(rng.randint(-50, 50), rng.randint(1, 20)) for _ in range(3)]
            if not any(v):
                continue
            val = evaluate(p, v)
            if worst is None or val < worst:
                worst = val
        return worst is not None and worst > 0, f"{samples} rational points, smallest value {float(worst):.4g}"

    def p_dh():
        rep = is_sos_convex(dehomogenize(p, 2), tol=tol)
        return rep.verdict == "convex-not-sos-convex", f"p(x1, x2, 1): {rep.verdict} (r = {rep.convex_r})"

    def p_bar_dh():
        rep = is_sos_convex(dehomogenize(p, 0), tol=tol)
        return rep.verdict == "sos-convex", f"p(1, x2, x3): {rep.verdict}"

    steps = [
        ("Motzkin form is not SOS", motzkin),
        ("Motzkin form times (x1^2+x2^2+x3^2) is SOS", motzkin_times),
        ("Choi matrix: not a Hessian, not an sos-matrix, all 7 minors SOS", choi),
        ("Multiplier certificate for y^T H y: exact identity, PD blocks", multiplier_identity),
        ("Separating functional for H11: pairing -8.948, PD moment matrix", separation_cert),
        ("H11 derived from p matches its coefficient vector", h11),
        ("p is convex (r = 1) but not sos-convex", example_verdict),
        ("p is SOS", p_sos),
        ("p is positive at sampled rational points", p_positive),
        ("p(x1, x2, 1) is convex but not sos-convex", p_dh),
        ("p(1, x2, x3) is sos-convex", p_bar_dh),
    ]
    for name, fn in steps:
        checks.append(_timed(name, fn))
    return checks


def fixture_target(p):
    return quadratic_form_in_y(hessian(p))


def example_polynomial():
    return parse_polynomial(EXAMPLE_P, ["x1", "x2", "x3"])
