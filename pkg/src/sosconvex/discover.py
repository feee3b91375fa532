"""Search for convex forms that are not sos-convex (and psd forms that are not SOS).

The search fixes a linear functional ``mu`` that separates a known non-SOS
form from the SOS cone, then looks for a form ``p`` whose Hessian satisfies a
multiplier SOS condition (so ``p`` is convex) while ``<mu, H_ii(p)> <= -margin``
(so the diagonal entry ``H_ii`` cannot be SOS, and neither can the Hessian).
"""

from __future__ import annotations

import json
import logging
import math
from dataclasses import asdict, dataclass, field
from fractions import Fraction
from typing import Sequence

import numpy as np

from .convexcert import (
    MOTZKIN_FORM,
    SeparationCertificate,
    SosConvexityReport,
    certify_sos,
    find_separation,
    is_sos_convex,
    verify_separation,
)
from .grambasis import GramCertificate, MonomialBasis, sos_blocks
from .polycore import (
    Monomial,
    Polynomial,
    all_monomials,
    differentiate,
    hessian,
    monomial_mul,
    parse_polynomial,
    quadratic_form_in_y,
    substitute_scaling,
    sum_of_squares_multiplier,
)
from .sdpsolve import SdpBuilder, SdpProblem, SdpSolution, project_onto_sos, solve, sos_feasibility

log = logging.getLogger(__name__)


class SearchError(RuntimeError):
    pass


class AlreadySosError(SearchError):
    pass


class PostprocessError(SearchError):
    pass


@dataclass
class SearchConfig:
    nvars: int = 3
    degree: int = 8
    multiplier_r: int = 1
    # functional over all_monomials(nvars, degree - 2) (convex mode) or
    # all_monomials(nvars, degree) (psd mode); None = Motzkin projection
    dual_mu: list | None = None
    strictness_margin: float = 1.0
    target_minor: tuple[int, ...] = (1,)
    mode: str = "convex"  # convex | psd
    max_r: int = 2
    gram_trace: float | None = None
    tol: float = 1e-8
    scale_search: bool = True
    magnitudes: tuple[int, ...] = (100, 1000, 10_000, 100_000)

    def __post_init__(self):
        if self.degree % 2:
            raise ValueError("degree must be even")
        if self.mode not in ("convex", "psd"):
            raise ValueError(f"unknown search mode {self.mode!r}")
        if self.multiplier_r < 0:
            raise ValueError("multiplier_r must be nonnegative")
        if self.strictness_margin <= 0:
            raise ValueError("margin must be positive")
        self.target_minor = tuple(self.target_minor)
        if len(self.target_minor) != 1 or not 1 <= self.target_minor[0] <= self.nvars:
            raise ValueError("target_minor must name one diagonal entry (the constraint must stay linear in p)")
        self.magnitudes = tuple(self.magnitudes)

    @property
    def functional_degree(self) -> int:
        return self.degree - 2 if self.mode == "convex" else self.degree

    def functional_monomials(self) -> list[Monomial]:
        return all_monomials(self.nvars, self.functional_degree)

    def to_dict(self) -> dict:
        doc = asdict(self)
        if self.dual_mu is not None:
            doc["dual_mu"] = [str(v) if isinstance(v, Fraction) else v for v in self.dual_mu]
        doc["target_minor"] = list(self.target_minor)
        doc["magnitudes"] = list(self.magnitudes)
        return doc

    @classmethod
    def from_dict(cls, doc: dict) -> "SearchConfig":
        doc = dict(doc)
        unknown = set(doc) - set(cls.__dataclass_fields__)
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        if doc.get("dual_mu") is not None:
            doc["dual_mu"] = [Fraction(v) if isinstance(v, str) else v for v in doc["dual_mu"]]
        return cls(**doc)

    @classmethod
    def from_json(cls, text: str) -> "SearchConfig":
        return cls.from_dict(json.loads(text))


# -- separating functionals ------------------------------------------------------------


def _aligned(values: dict[Monomial, float], monomials: Sequence[Monomial]) -> np.ndarray:
    return np.array([values.get(m, 0.0) for m in monomials], dtype=float)


def hyperplane_from_projection(form: Polynomial, tol: float = 1e-8) -> np.ndarray:
    """Unit functional ``(projection - form) / ||.||`` over ``all_monomials(n, deg)``."""
    if not form.is_form():
        raise ValueError("expected a form")
    res = project_onto_sos(form, tol=tol)
    if not res.hyperplane.any():
        raise AlreadySosError("form is already SOS (projection distance is zero)")
    mons = all_monomials(form.nvars, form.degree)
    return _aligned(dict(zip(res.rows, res.hyperplane)), mons)


def hyperplane_from_infeasibility(form: Polynomial, tol: float = 1e-8) -> np.ndarray:
    """Unit dual vector of the not-SOS branch of :func:`sos_feasibility`.

    Uses the full half-degree basis, so the functional is nonnegative on every
    SOS polynomial of that degree, not only on those with the form's support.
    """
    d = form.degree // 2
    lo = d if form.is_form() else 0
    full = MonomialBasis(form.nvars, tuple(m for k in range(lo, d + 1) for m in all_monomials(form.nvars, k)))
    res = sos_feasibility(form, [full], tol=tol)
    if res.is_sos:
        raise AlreadySosError("form is SOS; no separating functional")
    mons = all_monomials(form.nvars, form.degree) if form.is_form() else list(res.rows)
    return _aligned(dict(zip(res.rows, res.unit_dual())), mons)


def pair(functional: Sequence, monomials: Sequence[Monomial], p: Polynomial):
    return sum(w * p.coeff(m) for w, m in zip(functional, monomials))


def default_mu(cfg: SearchConfig) -> np.ndarray:
    if cfg.nvars != 3 or cfg.functional_degree != 6:
        raise SearchError("no default functional for this shape; supply dual_mu")
    return hyperplane_from_projection(parse_polynomial(MOTZKIN_FORM, ["x1", "x2", "x3"]))


# -- program assembly --------------------------------------------------------------------


@dataclass
class SearchProgram:
    problem: SdpProblem
    cfg: SearchConfig
    blocks: list[MonomialBasis]
    coeff_monomials: list[Monomial]
    rows: list[Monomial]
    weights: np.ndarray  # pairing functional expressed on the coefficients of p
    gram_trace: float | None
    phase: str

    @property
    def block_sizes(self) -> list[int]:
        return [len(b) for b in self.blocks]

    def coefficients(self, sol: SdpSolution) -> np.ndarray:
        return sol.u[: len(self.coeff_monomials)]

    def polynomial(self, coeffs: Sequence[float], drop: float = 1e-9) -> Polynomial:
        scale = max(1.0, float(np.max(np.abs(coeffs)))) if len(coeffs) else 1.0
        return Polynomial(self.cfg.nvars, {
            m: Fraction(float(c)).limit_denominator(10**12)
            for m, c in zip(self.coeff_monomials, coeffs) if abs(c) > drop * scale
        })


def _contribution(cfg: SearchConfig, mono: Monomial, mult: Polynomial | None) -> Polynomial:
    """Gram target produced by the single monomial ``x^mono`` of the unknown form."""
    x = Polynomial.monomial(mono)
    if cfg.mode == "convex":
        t = quadratic_form_in_y(hessian(x))
    else:
        t = x
    return t if mult is None else mult * t


def _weights(cfg: SearchConfig, mu: np.ndarray, coeff_monomials) -> np.ndarray:
    fmons = cfg.functional_monomials()
    if len(mu) != len(fmons):
        raise ValueError(f"dual_mu has {len(mu)} entries, expected {len(fmons)}")
    if cfg.mode == "psd":
        return np.asarray(mu, dtype=float)
    i = cfg.target_minor[0] - 1
    idx = {m: k for k, m in enumerate(fmons)}
    w = np.zeros(len(coeff_monomials))
    for a, mono in enumerate(coeff_monomials):
        h = differentiate(differentiate(Polynomial.monomial(mono), i), i)
        w[a] = sum(float(mu[idx[m]]) * float(c) for m, c in h.terms.items())
    return w


def _program_blocks(contribs: dict[Monomial, Polynomial], nv: int) -> list[MonomialBasis]:
    # Gram basis from the even part of the family; odd coefficients are then
    # forced to vanish by the coefficient rows, which loses nothing because
    # averaging over sign flips maps feasible points to feasible even points.
    even = {}
    for mono, t in contribs.items():
        if all(e % 2 == 0 for e in mono):
            for m in t.terms:
                even[m] = 1
    return sos_blocks(Polynomial(nv, even))


def build_search_program(cfg: SearchConfig, mu: Sequence | None = None, phase: str = "main",
                         gram_trace: float | None = None) -> SearchProgram:
    """Assemble the search SDP.

    Free variables: the coefficients of the unknown form, then ``t`` (main
    phase only). PSD blocks: the Gram blocks and a scalar slack for
    ``<mu, .> <= -margin``. The main phase maximizes ``t`` with ``Q - tI``
    PSD and the total Gram trace fixed; the ``calibrate`` phase minimizes the
    pairing over unit-trace Gram matrices and has no margin row.
    """
    if mu is None:
        mu = cfg.dual_mu if cfg.dual_mu is not None else default_mu(cfg)
    mu = np.array([float(v) for v in mu])
    coeff_monomials = all_monomials(cfg.nvars, cfg.degree)
    r = cfg.multiplier_r
    if cfg.mode == "convex":
        nv = 2 * cfg.nvars
        mult = sum_of_squares_multiplier(nv, r, cfg.nvars) if r else None
    else:
        nv = cfg.nvars
        mult = sum_of_squares_multiplier(nv, r) if r else None
    contribs = {m: _contribution(cfg, m, mult) for m in coeff_monomials}
    blocks = _program_blocks(contribs, nv)
    weights = _weights(cfg, mu, coeff_monomials)

    rowset: dict[Monomial, None] = {}
    gram_entries: dict[Monomial, dict] = {}
    for k, basis in enumerate(blocks):
        mons = basis.monomials
        for i in range(len(mons)):
            for j in range(i, len(mons)):
                g = monomial_mul(mons[i], mons[j])
                rowset.setdefault(g, None)
                gram_entries.setdefault(g, {})[(k, i, j)] = 1.0 if i == j else 2.0
    for t in contribs.values():
        for g in t.terms:
            rowset.setdefault(g, None)
    rows = list(rowset)
    ncoef = len(coeff_monomials)
    with_t = phase == "main"
    t_col = ncoef
    K = len(blocks)
    dims = [len(b) for b in blocks] + ([1] if with_t else [])
    bld = SdpBuilder(dims, n_free=ncoef + (1 if with_t else 0))
    lin: dict[Monomial, dict[int, float]] = {g: {} for g in rows}
    for a, mono in enumerate(coeff_monomials):
        for g, c in contribs[mono].terms.items():
            lin[g][a] = lin[g].get(a, 0.0) - float(c)
    for g in rows:
        ents = gram_entries.get(g, {})
        free = dict(lin[g])
        if with_t:
            tr = sum(v for (k, i, j), v in ents.items() if i == j)
            if tr:
                free[t_col] = tr
        bld.add_row(ents, free, 0.0)
    trace_ents = {(k, i, i): 1.0 for k, b in enumerate(blocks) for i in range(len(b))}
    if with_t:
        if gram_trace is None:
            gram_trace = cfg.gram_trace if cfg.gram_trace is not None else float(sum(dims[:K]))
        bld.add_row(trace_ents, {t_col: float(sum(dims[:K]))}, gram_trace)
        margin_free = {a: float(w) for a, w in enumerate(weights) if w}
        bld.add_row({(K, 0, 0): 1.0}, margin_free, -cfg.strictness_margin)
        bld.f[t_col] = -1.0
    else:
        bld.add_row(trace_ents, None, 1.0)
        bld.f[:ncoef] = weights
    return SearchProgram(bld.build(), cfg, blocks, coeff_monomials, rows, weights, gram_trace, phase)


# -- search --------------------------------------------------------------------------


@dataclass
class SearchResult:
    success: bool
    candidate: Polynomial | None
    certified: SosConvexityReport | None
    mu_used: list[float]
    diagnostics: list[str] = field(default_factory=list)
    final: Polynomial | None = None
    multiplier_r: int | None = None
    scaled: bool = False
    infeasible: bool = False

    def transcript(self) -> str:
        lines = list(self.diagnostics)
        if self.final is not None:
            lines.append(f"certified form: {self.final}")
        if self.certified is not None:
            lines.append(self.certified.summary())
        lines.append("SUCCESS" if self.success else "NO CERTIFIED CANDIDATE")
        return "\n".join(lines)


def calibrate_trace(cfg: SearchConfig, mu: Sequence) -> tuple[float, SdpSolution]:
    """Most negative pairing over unit-trace Gram data; returns ``(a, solution)`` with ``a >= 0``."""
    prog = build_search_program(cfg, mu, phase="calibrate")
    sol = solve(prog.problem, tol=cfg.tol)
    if sol.status != "optimal":
        return 0.0, sol
    return max(0.0, -sol.primal_objective), sol


def _solve_main(cfg: SearchConfig, mu: np.ndarray, diagnostics: list[str]):
    a, cal = calibrate_trace(cfg, mu)
    diagnostics.append(f"r={cfg.multiplier_r} calibration: status {cal.status}, best unit-trace pairing {-a:.6g}")
    if a <= 1e-7 * max(1.0, float(np.linalg.norm(mu))):
        return None, None
    trace = 2 * cfg.strictness_margin / a
    prog = build_search_program(cfg, mu, phase="main", gram_trace=trace)
    sol = solve(prog.problem, tol=cfg.tol)
    t = float(sol.u[-1]) if sol.u.size else float("nan")
    diagnostics.append(f"r={cfg.multiplier_r} main program: status {sol.status}, blocks {prog.block_sizes}, "
                       f"trace {trace:.6g}, min Gram eigenvalue {t:.3e}")
    if sol.status not in ("optimal", "max_iter") or not t > 0:
        return prog, None
    return prog, sol


def search_counterexample(cfg: SearchConfig | None = None) -> SearchResult:
    """Find and exactly certify a convex, not sos-convex form."""
    cfg = cfg or SearchConfig()
    if cfg.mode == "psd":
        return search_psd_not_sos(cfg)
    mu = np.array([float(v) for v in cfg.dual_mu]) if cfg.dual_mu is not None else default_mu(cfg)
    diagnostics: list[str] = []
    any_solved = False
    for r in range(cfg.multiplier_r, max(cfg.multiplier_r, cfg.max_r) + 1):
        sub = SearchConfig(**{**cfg.__dict__, "multiplier_r": r})
        prog, sol = _solve_main(sub, mu, diagnostics)
        if sol is None:
            continue
        any_solved = True
        candidate = prog.polynomial(prog.coefficients(sol))
        try:
            final, report, scaled = postprocess_rationalize(candidate, cfg.scale_search, cfg.magnitudes,
                                                            r_cap=max(r, 1), diagnostics=diagnostics)
        except PostprocessError as exc:
            diagnostics.append(f"r={r} post-processing: {exc}")
            continue
        return SearchResult(True, candidate, report, list(mu), diagnostics, final, r, scaled)
    return SearchResult(False, None, None, list(mu), diagnostics, infeasible=not any_solved)


def _round_integer(p: Polynomial, magnitude: int | None) -> Polynomial:
    coeffs = {m: float(c) for m, c in p.terms.items()}
    if magnitude is None:
        ints = {m: int(c) for m, c in p.terms.items()}
    else:
        top = max(abs(c) for c in coeffs.values())
        ints = {m: round(c * magnitude / top) for m, c in coeffs.items()}
    ints = {m: c for m, c in ints.items() if c}
    g = math.gcd(*ints.values()) if ints else 1
    return Polynomial(p.nvars, {m: c // g for m, c in ints.items()})


def balancing_scales(p: Polynomial) -> list[Fraction] | None:
    """Diagonal scaling that roughly equalizes the pure-power coefficients."""
    d = p.degree
    pure = []
    for i in range(p.nvars):
        e = [0] * p.nvars
        e[i] = d
        pure.append(float(p.coeff(tuple(e))))
    if any(c <= 0 for c in pure):
        return None
    ref = math.exp(sum(math.log(c) for c in pure) / len(pure))
    return [Fraction((ref / c) ** (1 / d)).limit_denominator(8) for c in pure]


def postprocess_rationalize(candidate: Polynomial, scale_search: bool = True,
                            magnitudes: Sequence[int] = (100, 1000, 10_000, 100_000), r_cap: int = 1,
                            diagnostics: list[str] | None = None):
    """Integer form near ``candidate`` that the exact pipeline certifies convex, not sos-convex.

    Returns ``(form, report, scaled)``. Tries the candidate itself when it
    already has integer coefficients, then roundings at increasing
    magnitudes, then (optionally) the same after a diagonal rescaling.
    """
    if candidate.is_zero():
        raise PostprocessError("degenerate candidate: zero polynomial")
    diagnostics = diagnostics if diagnostics is not None else []
    attempts: list[tuple[Polynomial, bool, str]] = []
    if all(c.denominator == 1 for c in candidate.terms.values()):
        attempts.append((_round_integer(candidate, None), False, "as given"))
    for M in magnitudes:
        attempts.append((_round_integer(candidate, M), False, f"rounded at magnitude {M}"))
    if scale_search:
        s = balancing_scales(candidate)
        if s is not None and any(v != 1 for v in s):
            scaled = substitute_scaling(candidate, s)
            for M in magnitudes:
                attempts.append((_round_integer(scaled, M), True,
                                 f"diagonal scaling {[str(v) for v in s]}, magnitude {M}"))
    seen = set()
    for q, scaled_flag, label in attempts:
        if q in seen or q.is_zero():
            continue
        seen.add(q)
        report = is_sos_convex(q, r_cap=r_cap)
        diagnostics.append(f"candidate {label}: {report.verdict}")
        if report.verdict == "convex-not-sos-convex":
            return q, report, scaled_flag
    raise PostprocessError("no integer candidate within the search budget re-certifies")


@dataclass
class ConstraintCheck:
    pairing: Fraction | float
    margin_ok: bool
    gram_ok: bool
    min_eig: float

    @property
    def feasible(self) -> bool:
        return self.margin_ok and self.gram_ok


def evaluate_candidate(cfg: SearchConfig, p: Polynomial, mu: Sequence | None = None) -> ConstraintCheck:
    """Check the search constraints at a given form.

    The pairing is exact when ``mu`` is rational; the Gram condition is
    checked numerically over the program's blocks.
    """
    mu = cfg.dual_mu if mu is None else mu
    if mu is None:
        mu = default_mu(cfg)
    fmons = cfg.functional_monomials()
    if cfg.mode == "convex":
        i = cfg.target_minor[0] - 1
        h = differentiate(differentiate(p, i), i)
        target = quadratic_form_in_y(hessian(p))
        mult = sum_of_squares_multiplier(2 * cfg.nvars, cfg.multiplier_r, cfg.nvars)
    else:
        h = p
        target = p
        mult = sum_of_squares_multiplier(cfg.nvars, cfg.multiplier_r)
    value = pair(mu, fmons, h)
    target = mult * target if cfg.multiplier_r else target
    res = sos_feasibility(target, sos_blocks(target), tol=cfg.tol)
    return ConstraintCheck(value, value <= -cfg.strictness_margin, bool(res.is_sos), res.t)


def embed_functional(c: Sequence, subspace: MonomialBasis, monomials: Sequence[Monomial]) -> list[Fraction]:
    """Extend a functional on a subspace by zero to the full coefficient space."""
    vals = dict(zip(subspace, c))
    return [Fraction(vals.get(m, 0)) for m in monomials]


# -- psd but not SOS --------------------------------------------------------------------


@dataclass
class PsdSearchResult:
    success: bool
    form: Polynomial | None
    psd_certificate: GramCertificate | None
    separation: SeparationCertificate | None
    separation_source: str
    mu_used: list[float]
    diagnostics: list[str] = field(default_factory=list)
    infeasible: bool = False

    def transcript(self) -> str:
        lines = list(self.diagnostics)
        if self.form is not None:
            lines.append(f"form: {self.form}")
        if self.psd_certificate is not None:
            lines.append(f"nonnegativity certified with multiplier exponent r = {self.psd_certificate.multiplier_r}")
        if self.separation is not None:
            lines.append(f"not SOS: separating functional from {self.separation_source}")
        lines.append("SUCCESS" if self.success else "NO CERTIFIED CANDIDATE")
        return "\n".join(lines)


def search_psd_not_sos(cfg: SearchConfig) -> PsdSearchResult:
    """Find a nonnegative form that is not SOS, with exact certificates for both facts."""
    if cfg.mode != "psd":
        cfg = SearchConfig(**{**cfg.__dict__, "mode": "psd"})
    mu = np.array([float(v) for v in cfg.dual_mu]) if cfg.dual_mu is not None else default_mu(cfg)
    fmons = cfg.functional_monomials()
    diagnostics: list[str] = []
    any_solved = False
    for r in range(max(cfg.multiplier_r, 1), max(cfg.multiplier_r, cfg.max_r) + 1):
        sub = SearchConfig(**{**cfg.__dict__, "multiplier_r": r})
        prog, sol = _solve_main(sub, mu, diagnostics)
        if sol is None:
            continue
        any_solved = True
        candidate = prog.polynomial(prog.coefficients(sol))
        for M in cfg.magnitudes:
            q = _round_integer(candidate, M)
            psd = certify_sos(q, r, separate=False)
            if not psd.is_sos:
                diagnostics.append(f"magnitude {M}: nonnegativity not certified ({psd.note})")
                continue
            z = MonomialBasis(q.nvars, tuple(all_monomials(q.nvars, q.degree // 2)))
            subspace = MonomialBasis(q.nvars, tuple(fmons))
            sep, source = None, ""
            for denom in (10**3, 10**4, 10**6):
                c = [Fraction(round(v * denom), denom) for v in mu]
                cand = SeparationCertificate(subspace, c, z, q)
                if verify_separation(cand).passed:
                    sep, source = cand, f"search functional rounded to 1/{denom}"
                    break
            if sep is None:
                sep = find_separation(q)
                source = "fresh functional on the form's support"
            if sep is None:
                diagnostics.append(f"magnitude {M}: no exact separator")
                continue
            diagnostics.append(f"magnitude {M}: certified psd and not SOS")
            return PsdSearchResult(True, q, psd.certificate, sep, source, list(mu), diagnostics)
    return PsdSearchResult(False, None, None, None, "", list(mu), diagnostics, infeasible=not any_solved)
