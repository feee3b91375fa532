"""Command-line interface.

Exit codes
  0   success / SOS / sos-convex / certificate PASS
  1   input could not be parsed
  2   inconclusive
  3   solver failure
  4   missing fixture (reproduce-paper)
  10  not SOS / convex but not sos-convex / certificate FAIL / a reproduction step failed
  11  not sos-convex, convexity not certified
  12  search infeasible
  13  search budget exhausted
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .convexcert import (
    SeparationCertificate,
    certify_sos,
    is_sos_convex,
    verify_separation,
)
from .discover import SearchConfig, search_counterexample, search_psd_not_sos
from .grambasis import GramCertificate, verify_certificate
from .polycore import (
    ParseError,
    PolynomialError,
    format_polynomial,
    hessian,
    parse_polynomial,
    polynomial_from_dict,
)
from .reproduce import MissingFixture, run_checks
from .sdpsolve import project_onto_sos

EXIT_OK, EXIT_PARSE, EXIT_INCONCLUSIVE, EXIT_SOLVER, EXIT_FIXTURE = 0, 1, 2, 3, 4
EXIT_NEGATIVE, EXIT_NOT_CERTIFIED, EXIT_INFEASIBLE, EXIT_BUDGET = 10, 11, 12, 13


class InputError(Exception):
    pass


def read_polynomial(path: str):
    p = Path(path)
    if not p.is_file():
        raise InputError(f"no such file: {path}")
    text = p.read_text().strip()
    try:
        if text.startswith("{"):
            return polynomial_from_dict(json.loads(text))
        return parse_polynomial(" ".join(text.split()))
    except ParseError as exc:
        raise InputError(f"{path}: parse error: {exc}") from exc
    except (PolynomialError, ValueError, KeyError) as exc:
        raise InputError(f"{path}: {exc}") from exc


def write_json(path: str | Path, doc: dict) -> None:
    Path(path).write_text(json.dumps(doc, indent=1) + "\n")


def _sidecar(args, doc: dict) -> None:
    if args.json:
        write_json(args.json, doc)


def _default_out(args, suffix: str) -> Path:
    if args.out:
        return Path(args.out)
    return Path(args.input).with_suffix(suffix)


# -- subcommands --------------------------------------------------------------------


def cmd_check_sos(args) -> int:
    p = read_polynomial(args.input)
    print(f"polynomial: {format_polynomial(p)}")
    r = args.r or 0
    chk = certify_sos(p, multiplier_r=r, tol=args.tol, denominator_bound=args.denom_bound)
    if chk.numeric is not None:
        sol = chk.numeric.solution
        print(f"solver: {sol.status} after {sol.iterations} iterations, optimal t = {chk.numeric.t:.6g}")
        if sol.status not in ("optimal", "primal_infeasible") and chk.verdict == "inconclusive":
            print(f"solver failure: {sol.message}")
            _sidecar(args, {"verdict": "solver_failure", "status": sol.status})
            return EXIT_SOLVER
    doc = {"verdict": chk.verdict, "multiplier_r": r}
    code = EXIT_INCONCLUSIVE
    if chk.is_sos:
        out = _default_out(args, ".cert.json")
        write_json(out, chk.certificate.to_dict())
        rep = verify_certificate(chk.certificate)
        print(rep.summary())
        print(f"SOS{' after multiplying by (sum x_i^2)^' + str(r) if r else ''}; certificate written to {out}")
        doc["certificate"] = str(out)
        code = EXIT_OK
    elif chk.verdict == "not_sos":
        if chk.separation is not None:
            out = _default_out(args, ".sep.json")
            write_json(out, chk.separation.to_dict())
            print(verify_separation(chk.separation).summary())
            print(f"NOT SOS; separation certificate written to {out}")
            doc["certificate"] = str(out)
        else:
            print(f"NOT SOS: {chk.note}")
        code = EXIT_NEGATIVE
    else:
        print(f"INCONCLUSIVE: {chk.note}")
    _sidecar(args, doc)
    return code


def cmd_check_sos_convex(args) -> int:
    p = read_polynomial(args.input)
    rep = is_sos_convex(p, r_cap=args.r or 3, tol=args.tol)
    print(rep.summary())
    doc = {"verdict": rep.verdict, "convex_r": rep.convex_r, "negative_source": rep.negative_source}
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        for name, cert in (("sos_convex", rep.sos_witness), ("convexity", rep.convexity_witness),
                           ("separation", rep.negative_witness)):
            if cert is not None:
                write_json(out / f"{name}.json", cert.to_dict())
                doc[name] = str(out / f"{name}.json")
    _sidecar(args, doc)
    return {
        "sos-convex": EXIT_OK,
        "convex-not-sos-convex": EXIT_NEGATIVE,
        "not-sos-convex": EXIT_NOT_CERTIFIED,
    }.get(rep.verdict, EXIT_INCONCLUSIVE)


def cmd_verify(args) -> int:
    path = Path(args.input)
    try:
        doc = json.loads(path.read_text())
        kind = doc.get("kind")
        if kind == "gram_certificate":
            cert = GramCertificate.from_dict(doc)
            rep = verify_certificate(cert)
        elif kind == "separation_certificate":
            cert = SeparationCertificate.from_dict(doc)
            rep = verify_separation(cert)
        else:
            raise InputError(f"{path}: unknown certificate kind {kind!r}")
    except (OSError, json.JSONDecodeError, KeyError, ValueError, TypeError) as exc:
        raise InputError(f"{path}: {exc}") from exc
    text = format_polynomial(cert.target)
    print(f"{kind.replace('_', ' ')} for {text if len(text) <= 160 else text[:157] + '...'}")
    print(rep.summary())
    _sidecar(args, {"kind": kind, "passed": rep.passed})
    return EXIT_OK if rep.passed else EXIT_NEGATIVE


def cmd_search(args) -> int:
    if args.input:
        try:
            cfg = SearchConfig.from_json(Path(args.input).read_text())
        except (OSError, json.JSONDecodeError, TypeError, ValueError) as exc:
            raise InputError(f"{args.input}: {exc}") from exc
    else:
        cfg = SearchConfig()
    overrides = {}
    if args.r is not None:
        overrides["multiplier_r"] = args.r
    if args.margin is not None:
        overrides["strictness_margin"] = args.margin
    if overrides:
        cfg = SearchConfig(**{**cfg.__dict__, **overrides})
    cfg.tol = args.tol
    out = Path(args.out) if args.out else Path("search_result")
    if cfg.mode == "psd":
        res = search_psd_not_sos(cfg)
        print(res.transcript())
        if res.success:
            out.mkdir(parents=True, exist_ok=True)
            (out / "candidate.txt").write_text(format_polynomial(res.form) + "\n")
            write_json(out / "gram_certificate.json", res.psd_certificate.to_dict())
            write_json(out / "separation_certificate.json", res.separation.to_dict())
            (out / "transcript.txt").write_text(res.transcript() + "\n")
    else:
        res = search_counterexample(cfg)
        print(res.transcript())
        if res.success:
            out.mkdir(parents=True, exist_ok=True)
            rep = res.certified
            (out / "candidate.txt").write_text(format_polynomial(res.final) + "\n")
            write_json(out / "gram_certificate.json", rep.convexity_witness.to_dict())
            write_json(out / "separation_certificate.json", rep.negative_witness.to_dict())
            (out / "transcript.txt").write_text(res.transcript() + "\n")
    _sidecar(args, {"success": res.success, "infeasible": res.infeasible, "diagnostics": res.diagnostics})
    if res.success:
        print(f"bundle written to {out}")
        return EXIT_OK
    return EXIT_INFEASIBLE if res.infeasible else EXIT_BUDGET


def cmd_reproduce(args) -> int:
    try:
        checks = run_checks(args.data_dir, tol=args.tol)
    except MissingFixture as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FIXTURE
    failed = []
    for i, chk in enumerate(checks, 1):
        print(f"[{i:2d}] {'PASS' if chk.passed else 'FAIL'}  {chk.name}  ({chk.seconds:.2f} s)")
        print(f"       {chk.detail}")
        if not chk.passed:
            failed.append(chk.name)
    print(f"{len(checks) - len(failed)}/{len(checks)} checks passed")
    _sidecar(args, {"checks": [c.__dict__ for c in checks]})
    if failed:
        print("failed: " + "; ".join(failed), file=sys.stderr)
        return EXIT_NEGATIVE
    return EXIT_OK


def cmd_project(args) -> int:
    p = read_polynomial(args.input)
    if not p.is_form():
        raise InputError("projection expects a form")
    res = project_onto_sos(p, tol=args.tol)
    if res.solution.status != "optimal":
        print(f"solver failure: {res.solution.status} {res.solution.message}")
        return EXIT_SOLVER
    q = res.projection_polynomial(p.nvars)
    print(f"distance: {res.distance:.10g}")
    print(f"projection: {format_polynomial(q)}")
    print("hyperplane:")
    for m, v in zip(res.rows, res.hyperplane):
        if abs(v) > 1e-9:
            print(f"  {list(m)}: {v:.10g}")
    _sidecar(args, {"distance": res.distance,
                    "rows": [list(m) for m in res.rows],
                    "projection": res.projection.tolist(),
                    "hyperplane": res.hyperplane.tolist()})
    return EXIT_OK


def cmd_hessian(args) -> int:
    p = read_polynomial(args.input)
    H = hessian(p)
    for i in range(H.dim):
        for j in range(i, H.dim):
            print(f"H[{i + 1},{j + 1}] = {format_polynomial(H[i, j])}")
    _sidecar(args, {"hessian": [[format_polynomial(H[i, j]) for j in range(H.dim)] for i in range(H.dim)]})
    return EXIT_OK


# -- parser --------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--tol", type=float, default=1e-8, help="solver tolerance (default 1e-8)")
    common.add_argument("--r", type=int, default=None, help="multiplier exponent / cap")
    common.add_argument("--margin", type=float, default=None, help="search strictness margin")
    common.add_argument("--denom-bound", type=int, default=10**6, help="starting rounding denominator")
    common.add_argument("--out", default=None, help="output file or directory")
    common.add_argument("--json", default=None, help="write a JSON report to this path")
    common.add_argument("-v", "--verbose", action="store_true")

    ap = argparse.ArgumentParser(prog="sosconvex", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=__version__)
    sub = ap.add_subparsers(dest="command", required=True)
    for name, fn, helptext in [
        ("check-sos", cmd_check_sos, "decide whether a polynomial is SOS, with a certificate"),
        ("check-sos-convex", cmd_check_sos_convex, "certify sos-convexity / convexity"),
        ("verify", cmd_verify, "exactly verify a certificate file"),
        ("project", cmd_project, "project a form onto the SOS cone"),
        ("hessian", cmd_hessian, "print the Hessian"),
    ]:
        sp = sub.add_parser(name, parents=[common], help=helptext)
        sp.add_argument("input")
        sp.set_defaults(func=fn)
    sp = sub.add_parser("search", parents=[common], help="search for a convex, not sos-convex form")
    sp.add_argument("input", nargs="?", default=None, help="JSON search config (defaults if omitted)")
    sp.set_defaults(func=cmd_search)
    sp = sub.add_parser("reproduce-paper", parents=[common], help="run every check of the worked example")
    sp.add_argument("--data-dir", default=None, help="directory holding the certificate fixtures")
    sp.set_defaults(func=cmd_reproduce)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    np.seterr(all="ignore")
    try:
        return args.func(args)
    except InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    except np.linalg.LinAlgError as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return EXIT_SOLVER


if __name__ == "__main__":
    sys.exit(main())
