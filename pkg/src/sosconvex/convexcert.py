"""Certificates for sos-matrices, sos-convexity and non-membership in the SOS cone."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from importlib import resources
from itertools import combinations
from typing import Sequence

import numpy as np

from .grambasis import (
    GramCertificate,
    GramSystemError,
    LdlResult,
    MonomialBasis,
    RationalizationError,
    certificate_from_blocks,
    gram_system,
    half_degree_basis,
    newton_filter,
    rational_psd_check,
    rationalize_gram,
    sos_blocks,
    verify_certificate,
)
from .polycore import (
    Monomial,
    PolyMatrix,
    Polynomial,
    _format_coeff,
    differentiate,
    exact_divide,
    format_polynomial,
    hessian,
    monomial_mul,
    parse_polynomial,
    polynomial_from_dict,
    polynomial_to_dict,
    quadratic_form_in_y,
    sum_of_squares_multiplier,
)
from .sdpsolve import SosResult, interior_separator, sos_feasibility

# -- valid Hessians -------------------------------------------------------------------


@dataclass
class HessianCheck:
    valid: bool
    # (i, j, k, dP_ij/dx_k, dP_ik/dx_j), zero-based indices
    violations: list[tuple[int, int, int, Polynomial, Polynomial]]

    @property
    def first_violation(self):
        return self.violations[0] if self.violations else None

    def describe(self, limit: int = 3) -> str:
        if self.valid:
            return "third partial derivatives commute: valid Hessian"
        out = []
        for i, j, k, lhs, rhs in self.violations[:limit]:
            out.append(f"d P[{i + 1},{j + 1}]/dx{k + 1} = {format_polynomial(lhs)} "
                       f"!= {format_polynomial(rhs)} = d P[{i + 1},{k + 1}]/dx{j + 1}")
        return "\n".join(out)


def is_valid_hessian(P: PolyMatrix) -> HessianCheck:
    """Check ``dP_ij/dx_k == dP_ik/dx_j`` for all index triples."""
    if not P.is_symmetric():
        raise ValueError("matrix must be symmetric")
    n = P.dim
    if P.nvars < n:
        return HessianCheck(False, [])
    bad = []
    for i in range(n):
        for j in range(n):
            for k in range(j + 1, n):
                lhs = differentiate(P[i, j], k)
                rhs = differentiate(P[i, k], j)
                if lhs != rhs:
                    bad.append((i, j, k, lhs, rhs))
    return HessianCheck(not bad, bad)


# -- determinants ---------------------------------------------------------------------


def bareiss_det(M: Sequence[Sequence[Polynomial]]) -> Polynomial:
    """Fraction-free determinant over Q[x]; every division is exact."""
    n = len(M)
    if n == 0:
        raise ValueError("empty matrix")
    nv = M[0][0].nvars
    A = [list(r) for r in M]
    sign = 1
    prev = Polynomial.constant(nv, 1)
    for k in range(n - 1):
        if A[k][k].is_zero():
            swap = next((i for i in range(k + 1, n) if not A[i][k].is_zero()), None)
            if swap is None:
                return Polynomial.zero(nv)
            A[k], A[swap] = A[swap], A[k]
            sign = -sign
        for i in range(k + 1, n):
            for j in range(k + 1, n):
                A[i][j] = exact_divide(A[k][k] * A[i][j] - A[i][k] * A[k][j], prev)
        prev = A[k][k]
    det = A[n - 1][n - 1]
    return det if sign > 0 else -det


def principal_minors(P: PolyMatrix, order: int | None = None) -> list[tuple[tuple[int, ...], Polynomial]]:
    """All principal minors, by increasing order then lexicographic index set."""
    n = P.dim
    orders = [order] if order is not None else range(1, n + 1)
    out = []
    for k in orders:
        for idx in combinations(range(n), k):
            sub = [[P[i, j] for j in idx] for i in idx]
            out.append((idx, bareiss_det(sub)))
    return out


def cauchy_binet_det(M: PolyMatrix) -> Polynomial:
    """``det(M^T M)`` as ``sum_S det(M_S)^2`` over row subsets of size ``m``."""
    s, m = M.shape
    nv = M.nvars
    if s < m:
        return Polynomial.zero(nv)
    total = Polynomial.zero(nv)
    for rows in combinations(range(s), m):
        d = bareiss_det([[M[i, j] for j in range(m)] for i in rows])
        total = total + d * d
    return total


# -- separation certificates -----------------------------------------------------------


def moment_matrix(c: Sequence, subspace: MonomialBasis, z: MonomialBasis) -> list[list[Fraction]]:
    if len(c) != len(subspace):
        raise ValueError("functional length does not match the subspace")
    val = {m: Fraction(v) for m, v in zip(subspace, c)}
    n = len(z)
    return [[val.get(monomial_mul(z[i], z[j]), Fraction(0)) for j in range(n)] for i in range(n)]


def required_basis(subspace: MonomialBasis) -> MonomialBasis:
    """Monomials that may occur in a square root of any SOS element of ``subspace``."""
    support = Polynomial(subspace.nvars, {m: 1 for m in subspace})
    return newton_filter(support, half_degree_basis(support))


@dataclass
class SeparationCertificate:
    subspace: MonomialBasis
    c: list[Fraction]
    z: MonomialBasis
    target: Polynomial

    def __post_init__(self):
        self.c = [Fraction(str(v)) if not isinstance(v, (int, Fraction)) else Fraction(v) for v in self.c]
        if len(self.c) != len(self.subspace):
            raise ValueError("functional length does not match the subspace")

    def pairing(self) -> Fraction:
        return sum((ci * self.target.coeff(m) for ci, m in zip(self.c, self.subspace)), Fraction(0))

    def to_dict(self) -> dict:
        return {
            "kind": "separation_certificate",
            "target": polynomial_to_dict(self.target),
            "subspace": [list(m) for m in self.subspace],
            "c": [_format_coeff(v) for v in self.c],
            "z": [list(m) for m in self.z],
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "SeparationCertificate":
        target = polynomial_from_dict(doc["target"])
        n = target.nvars
        return cls(
            MonomialBasis(n, tuple(tuple(m) for m in doc["subspace"])),
            doc["c"],
            MonomialBasis(n, tuple(tuple(m) for m in doc["z"])),
            target,
        )


@dataclass
class SeparationReport:
    pairing: Fraction
    support_ok: bool
    basis_ok: bool
    missing: list[Monomial]
    moment: LdlResult
    passed: bool

    def summary(self) -> str:
        p = self.pairing
        lines = [f"pairing <c, target> = {p} = {float(p):.6g} ({'< 0' if p < 0 else '>= 0'})"]
        lines.append("target support inside subspace: " + ("yes" if self.support_ok else "NO"))
        if self.basis_ok:
            lines.append("pairing basis covers every admissible half-degree monomial")
        else:
            lines.append(f"pairing basis misses {[list(m) for m in self.missing]}")
        pivots = ", ".join(str(d) for d in self.moment.D)
        lines.append(f"moment matrix ({len(self.moment.D)}x{len(self.moment.D)}): "
                     f"{self.moment.verdict.upper()}; pivots [{pivots}]")
        if self.moment.failure:
            lines.append(f"  {self.moment.failure}")
        lines.append("PASS" if self.passed else "FAIL")
        return "\n".join(lines)


def verify_separation(cert: SeparationCertificate) -> SeparationReport:
    """Exact check that ``cert.target`` is not SOS.

    Passes when the pairing is negative and the moment matrix is PSD, the
    target lives in the subspace, and ``z`` contains every monomial needed to
    write an SOS element of the subspace as ``z^T Q z``.
    """
    subspace = set(cert.subspace)
    support_ok = all(m in subspace for m in cert.target.terms)
    zset = set(cert.z)
    missing = [m for m in required_basis(cert.subspace) if m not in zset]
    moment = rational_psd_check(moment_matrix(cert.c, cert.subspace, cert.z))
    pairing = cert.pairing()
    ok = pairing < 0 and moment.is_psd and support_ok and not missing
    return SeparationReport(pairing, support_ok, not missing, missing, moment, ok)


def _round_vector(v: np.ndarray, denom: int) -> list[Fraction]:
    return [Fraction(int(round(x * denom)), denom) for x in v]


def find_separation(target: Polynomial, tol: float = 1e-8, max_denominator: int = 10**9) -> SeparationCertificate | None:
    """Search for an exact separating functional supported on ``target``'s monomials.

    Falls back to the full coefficient space of the Gram system when the
    support alone does not separate.
    """
    blocks = sos_blocks(target)
    try:
        gram_system(target, blocks)
    except GramSystemError:
        return None
    z = MonomialBasis(target.nvars, tuple(m for b in blocks for m in b))
    for support_only in (True, False):
        res = sos_feasibility(target, blocks, tol=tol, support_only=support_only)
        if res.is_sos or not np.isfinite(res.t):
            continue
        sep = interior_separator(target, blocks, res.t / 2, support_only=support_only, tol=tol)
        if sep.min_moment_eig <= 0 or sep.pairing >= 0:
            continue
        scale = np.max(np.abs(sep.functional))
        v = sep.functional / scale
        subspace = MonomialBasis(target.nvars, tuple(sep.rows))
        denom = 100
        while denom <= max_denominator:
            cert = SeparationCertificate(subspace, _round_vector(v, denom), z, target)
            if verify_separation(cert).passed:
                return cert
            denom *= 10
    return None


# -- SOS checks with exact certificates --------------------------------------------------


@dataclass
class SosCheck:
    verdict: str  # sos | not_sos | inconclusive
    target: Polynomial
    multiplied: Polynomial
    numeric: SosResult | None = None
    certificate: GramCertificate | None = None
    separation: SeparationCertificate | None = None
    note: str = ""

    @property
    def is_sos(self) -> bool:
        return self.verdict == "sos"

    @property
    def certified(self) -> bool:
        return self.certificate is not None or self.separation is not None or (
            self.verdict == "not_sos" and bool(self.note))


def certify_sos(target: Polynomial, multiplier_r: int = 0, multiplier_vars: int | None = None,
                multiplier_offset: int | None = None, tol: float = 1e-8,
                denominator_bound: int = 10**6, separate: bool = True) -> SosCheck:
    """Numeric SOS test of ``m^r * target`` followed by exact certification.

    ``sos`` and ``not_sos`` are only reported with an exact witness (or, for
    not-SOS, a structural reason such as an unreachable monomial).
    """
    if multiplier_offset is None:
        multiplier_offset = 0 if target.is_form() else 1
    mult = target
    if multiplier_r:
        mult = sum_of_squares_multiplier(target.nvars, multiplier_r, multiplier_vars, multiplier_offset) * target
    if mult.is_zero():
        cert = certificate_from_blocks(target, [], [], multiplier_r, multiplier_vars, multiplier_offset)
        return SosCheck("sos", target, mult, None, cert)
    if mult.degree % 2 or mult.min_degree() % 2:
        return SosCheck("not_sos", target, mult,
                        note="odd extreme degree: the top and bottom homogeneous parts of an SOS have even degree")
    blocks = sos_blocks(mult)
    try:
        res = sos_feasibility(mult, blocks, tol=tol)
    except GramSystemError as exc:
        return SosCheck("not_sos", target, mult, note=f"no Gram representation: {exc}")
    if res.is_sos:
        try:
            mats = rationalize_gram(res.gram, res.system, denominator_bound)
        except RationalizationError as exc:
            return SosCheck("inconclusive", target, mult, res, note=f"numerically SOS; rounding failed: {exc}")
        cert = certificate_from_blocks(target, blocks, mats, multiplier_r, multiplier_vars, multiplier_offset)
        if verify_certificate(cert).passed:
            return SosCheck("sos", target, mult, res, cert)
        return SosCheck("inconclusive", target, mult, res, note="rounded certificate failed verification")
    if not separate:
        return SosCheck("inconclusive", target, mult, res, note="numerically not SOS; no exact witness sought")
    sep = find_separation(mult, tol=tol)
    if sep is not None:
        return SosCheck("not_sos", target, mult, res, separation=sep)
    return SosCheck("inconclusive", target, mult, res, note="numerically not SOS; no exact separator found")


def _matrix_is_forms(P: PolyMatrix) -> bool:
    degs = {P[i, j].degree for i in range(P.dim) for j in range(P.dim) if not P[i, j].is_zero()}
    return len(degs) <= 1 and all(P[i, j].is_form() for i in range(P.dim) for j in range(P.dim))


def is_sos_matrix(P: PolyMatrix, multiplier_r: int = 0, tol: float = 1e-8,
                  separate: bool = True) -> SosCheck:
    """SOS test of ``m(x)^r * y^T P(x) y`` with ``m = sum x_i^2`` (``1 + sum x_i^2`` for non-forms)."""
    if not P.is_symmetric():
        raise ValueError("matrix must be symmetric")
    q = quadratic_form_in_y(P)
    offset = 0 if _matrix_is_forms(P) else 1
    return certify_sos(q, multiplier_r, P.nvars, offset, tol=tol, separate=separate)


# -- sos-convexity ---------------------------------------------------------------------


@dataclass
class SosConvexityReport:
    polynomial: Polynomial
    is_sos_convex: bool | None
    is_convex: bool | None  # True = certified; None = no certificate up to the cap
    convex_r: int | None
    sos_witness: GramCertificate | None = None
    convexity_witness: GramCertificate | None = None
    negative_witness: SeparationCertificate | None = None
    negative_source: str = ""
    notes: list[str] = field(default_factory=list)

    @property
    def verdict(self) -> str:
        if self.is_sos_convex:
            return "sos-convex"
        if self.is_sos_convex is False and self.is_convex:
            return "convex-not-sos-convex"
        if self.is_sos_convex is False:
            return "not-sos-convex"
        return "inconclusive"

    def summary(self) -> str:
        lines = [f"polynomial: {format_polynomial(self.polynomial)}"]
        if self.is_sos_convex:
            lines.append("Hessian is an sos-matrix (exact Gram certificate)")
        elif self.is_sos_convex is False:
            lines.append(f"Hessian is not an sos-matrix: separation on {self.negative_source}")
        else:
            lines.append("sos-convexity undecided")
        if self.is_convex:
            lines.append(f"convexity certified with multiplier exponent r = {self.convex_r}")
        else:
            lines.append("convexity not certified")
        lines.extend(self.notes)
        lines.append(f"verdict: {self.verdict}")
        return "\n".join(lines)


def _negative_witness(H: PolyMatrix, q: Polynomial, tol: float):
    for order in range(1, H.dim + 1):
        for idx, minor in principal_minors(H, order):
            if minor.is_zero():
                continue
            res = sos_feasibility(minor, sos_blocks(minor), tol=tol) if _reachable(minor) else None
            if res is not None and res.is_sos:
                continue
            sep = find_separation(minor, tol=tol)
            if sep is not None:
                label = ",".join(str(i + 1) for i in idx)
                return sep, f"principal minor ({label})"
    sep = find_separation(q, tol=tol)
    if sep is not None:
        return sep, "y^T H y"
    return None, ""


def _reachable(p: Polynomial) -> bool:
    try:
        gram_system(p, sos_blocks(p))
        return True
    except GramSystemError:
        return False


def is_sos_convex(p: Polynomial, r_cap: int = 3, tol: float = 1e-8) -> SosConvexityReport:
    H = hessian(p)
    report = SosConvexityReport(p, None, None, None)
    top = is_sos_matrix(H, 0, tol=tol, separate=False)
    if top.is_sos:
        report.is_sos_convex = True
        report.is_convex = True
        report.convex_r = 0
        report.sos_witness = top.certificate
        return report
    if top.verdict == "inconclusive" and top.numeric is not None and top.numeric.is_sos:
        report.notes.append(top.note)
        return report
    sep, source = _negative_witness(H, quadratic_form_in_y(H), tol)
    if sep is None:
        report.notes.append("numerically not an sos-matrix but no exact separator was found")
    else:
        report.is_sos_convex = False
        report.negative_witness = sep
        report.negative_source = source
    for r in range(1, r_cap + 1):
        chk = is_sos_matrix(H, r, tol=tol, separate=False)
        if chk.is_sos:
            report.is_convex = True
            report.convex_r = r
            report.convexity_witness = chk.certificate
            break
    return report


# -- reference example data --------------------------------------------------------------

EXAMPLE_P = (
    "32*x1^8 + 118*x1^6*x2^2 + 40*x1^6*x3^2 + 25*x1^4*x2^4 - 43*x1^4*x2^2*x3^2"
    " - 35*x1^4*x3^4 + 3*x1^2*x2^4*x3^2 - 16*x1^2*x2^2*x3^4 + 24*x1^2*x3^6"
    " + 16*x2^8 + 44*x2^6*x3^2 + 70*x2^4*x3^4 + 60*x2^2*x3^6 + 30*x3^8"
)
MOTZKIN = "x1^4*x2^2 + x1^2*x2^4 - 3*x1^2*x2^2 + 1"
MOTZKIN_FORM = "x1^4*x2^2 + x1^2*x2^4 - 3*x1^2*x2^2*x3^2 + x3^6"
CHOI = [
    ["x1^2 + 2*x2^2", "-x1*x2", "-x1*x3"],
    ["-x1*x2", "x2^2 + 2*x3^2", "-x2*x3"],
    ["-x1*x3", "-x2*x3", "x3^2 + 2*x1^2"],
]


def _load(name: str) -> dict:
    return json.loads(resources.files("sosconvex").joinpath("data").joinpath(name).read_text())


def load_multiplier_certificate(path=None) -> GramCertificate:
    doc = json.loads(open(path).read()) if path else _load("multiplier_certificate.json")
    return GramCertificate.from_dict(doc)


def load_separation_certificate(path=None) -> SeparationCertificate:
    doc = json.loads(open(path).read()) if path else _load("separation_certificate.json")
    return SeparationCertificate.from_dict(doc)


@lru_cache(maxsize=1)
def _fixtures() -> dict:
    p = parse_polynomial(EXAMPLE_P, ["x1", "x2", "x3"])
    sep = load_separation_certificate()
    return {
        "p": p,
        "H11": sep.target,
        "c": list(sep.c),
        "z_sep": sep.z,
        "S": sep.subspace,
        "separation": sep,
        "appendix_cert": load_multiplier_certificate(),
        "motzkin": parse_polynomial(MOTZKIN, ["x1", "x2"]),
        "motzkin_form": parse_polynomial(MOTZKIN_FORM, ["x1", "x2", "x3"]),
        "choi": PolyMatrix([[parse_polynomial(e, ["x1", "x2", "x3"]) for e in row] for row in CHOI]),
    }


def paper_fixtures() -> dict:
    """Exact constants of the worked example: p, H11, c, S, z, certificates, Motzkin, Choi."""
    return dict(_fixtures())
