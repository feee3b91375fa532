"""Dense block-diagonal SDP solver and the SOS programs built on it.

Problems are in the standard primal form with optional free variables::

    minimize    sum_k <C_k, X_k> + f^T u
    subject to  sum_k <A_ik, X_k> + (B u)_i = b_i,   X_k PSD,

whose dual is ``max b^T y  s.t.  C_k - sum_i y_i A_ik = S_k PSD, B^T y = f``.
The method is an infeasible-start primal-dual path-following scheme with
Nesterov-Todd scaling and Mehrotra's predictor-corrector. Everything is
double precision; exact answers are recovered downstream.
"""

from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
import scipy.linalg

from .grambasis import MonomialBasis, gram_system
from .polycore import Monomial, Polynomial, all_monomials, monomial_mul

log = logging.getLogger(__name__)

INFEASIBILITY_BOUND = 1e8


@dataclass
class SdpProblem:
    block_dims: list[int]
    C: list[np.ndarray]
    A: list[np.ndarray]  # per block, shape (m, n_k, n_k), symmetric slices
    b: np.ndarray
    B: np.ndarray | None = None  # (m, n_free)
    f: np.ndarray | None = None  # (n_free,)

    def __post_init__(self):
        self.b = np.asarray(self.b, dtype=float)
        m = self.b.shape[0]
        if self.B is None:
            self.B = np.zeros((m, 0))
        if self.f is None:
            self.f = np.zeros(self.B.shape[1])
        self.B = np.asarray(self.B, dtype=float).reshape(m, -1)
        self.f = np.asarray(self.f, dtype=float)
        if len(self.C) != len(self.block_dims) or len(self.A) != len(self.block_dims):
            raise ValueError("one C and one A stack per block")
        for n, C, A in zip(self.block_dims, self.C, self.A):
            if C.shape != (n, n) or A.shape != (m, n, n):
                raise ValueError("block dimension mismatch")
            if not np.allclose(C, C.T) or not np.allclose(A, A.transpose(0, 2, 1)):
                raise ValueError("block matrices must be symmetric")
        if self.f.shape != (self.B.shape[1],):
            raise ValueError("free-variable objective has the wrong size")

    @property
    def m(self) -> int:
        return self.b.shape[0]

    @property
    def n_free(self) -> int:
        return self.B.shape[1]

    def constraint_matrix(self) -> np.ndarray:
        """Rows ``[vec(A_i1) ... vec(A_iK) B_i]`` (full vec, off-diagonals twice)."""
        parts = [A.reshape(self.m, -1) for A in self.A] + [self.B]
        return np.hstack(parts) if parts else np.zeros((self.m, 0))

    def to_sparse_text(self) -> str:
        """Plain-text dump: block sizes, then ``block row col value`` lines per constraint."""
        lines = [f"{self.m} constraints", "blocks " + " ".join(map(str, self.block_dims)),
                 f"free {self.n_free}", "b " + " ".join(repr(float(v)) for v in self.b)]
        for k, C in enumerate(self.C):
            for i, j in zip(*np.nonzero(np.triu(C))):
                lines.append(f"0 {k + 1} {i + 1} {j + 1} {C[i, j]!r}")
        for k, A in enumerate(self.A):
            for r, i, j in zip(*np.nonzero(np.triu(A))):
                lines.append(f"{r + 1} {k + 1} {i + 1} {j + 1} {A[r, i, j]!r}")
        for r, c in zip(*np.nonzero(self.B)):
            lines.append(f"{r + 1} free {c + 1} {self.B[r, c]!r}")
        return "\n".join(lines) + "\n"


@dataclass
class SdpSolution:
    status: str  # optimal | primal_infeasible | dual_infeasible | max_iter
    X: list[np.ndarray]
    y: np.ndarray
    S: list[np.ndarray]
    u: np.ndarray
    primal_objective: float
    dual_objective: float
    gap: float
    primal_residual: float
    dual_residual: float
    iterations: int
    message: str = ""

    @property
    def optimal(self) -> bool:
        return self.status == "optimal"


class SdpBuilder:
    """Incremental assembly of an :class:`SdpProblem` from sparse entries."""

    def __init__(self, block_dims: Sequence[int], n_free: int = 0):
        self.block_dims = list(block_dims)
        self.n_free = n_free
        self.rows: list[tuple[dict, dict, float]] = []
        self.C = [np.zeros((n, n)) for n in self.block_dims]
        self.f = np.zeros(n_free)

    def add_row(self, block_entries: dict | None = None, free_entries: dict | None = None,
                rhs: float = 0.0) -> int:
        """``block_entries`` maps ``(k, i, j)`` to the coefficient of ``X_k[i, j]`` in
        ``<A, X>`` (so an off-diagonal pair given once counts once per triangle)."""
        self.rows.append((dict(block_entries or {}), dict(free_entries or {}), float(rhs)))
        return len(self.rows) - 1

    def build(self) -> SdpProblem:
        m = len(self.rows)
        A = [np.zeros((m, n, n)) for n in self.block_dims]
        B = np.zeros((m, self.n_free))
        b = np.zeros(m)
        for r, (ents, free, rhs) in enumerate(self.rows):
            for (k, i, j), v in ents.items():
                if i == j:
                    A[k][r, i, i] += v
                else:
                    A[k][r, i, j] += v / 2
                    A[k][r, j, i] += v / 2
            for c, v in free.items():
                B[r, c] += v
            b[r] = rhs
        return SdpProblem(self.block_dims, [c.copy() for c in self.C], A, b, B, self.f.copy())


# -- solver ----------------------------------------------------------------------


def _presolve(prob: SdpProblem):
    """Drop linearly dependent constraint rows; flag inconsistent ones."""
    M = prob.constraint_matrix()
    m = prob.m
    if m == 0:
        return np.arange(0), True
    _, R, piv = scipy.linalg.qr(M.T, mode="economic", pivoting=True)
    diag = np.abs(np.diag(R))
    tol = max(M.shape) * np.finfo(float).eps * (diag[0] if diag.size else 1.0) * 1e3
    rank = int(np.sum(diag > tol))
    keep = np.sort(piv[:rank])
    if rank == m:
        return keep, True
    # consistency of the dropped rows with the kept ones
    Mk = M[keep]
    coef, *_ = np.linalg.lstsq(Mk.T, M.T, rcond=None)
    pred = coef.T @ prob.b[keep]
    consistent = np.allclose(pred, prob.b, atol=1e-9 * (1 + np.abs(prob.b).max()))
    return keep, consistent


def _restrict(prob: SdpProblem, keep: np.ndarray) -> SdpProblem:
    return SdpProblem(prob.block_dims, prob.C, [A[keep] for A in prob.A], prob.b[keep],
                      prob.B[keep], prob.f)


def _nt_scaling(X: np.ndarray, S: np.ndarray):
    Lx = np.linalg.cholesky(X)
    Ls = np.linalg.cholesky(S)
    U, lam, Vt = np.linalg.svd(Ls.T @ Lx)
    R = Lx @ Vt.T / np.sqrt(lam)
    Rinv = (np.sqrt(lam)[:, None] * Vt) @ np.linalg.inv(Lx)
    return R, Rinv, lam


def _kkt_solver(K: np.ndarray):
    """LU solve, falling back to least squares when ``K`` is numerically singular."""
    with warnings.catch_warnings():
        warnings.simplefilter("error", scipy.linalg.LinAlgWarning)
        try:
            lu = scipy.linalg.lu_factor(K, check_finite=False)
            if np.all(np.isfinite(lu[0])):
                return lambda rhs: scipy.linalg.lu_solve(lu, rhs, check_finite=False)
        except (scipy.linalg.LinAlgWarning, np.linalg.LinAlgError, ValueError):
            pass
    if not np.all(np.isfinite(K)):
        return lambda rhs: np.full_like(rhs, np.nan)
    return lambda rhs: np.linalg.lstsq(K, rhs, rcond=1e-14)[0]


def _max_step(lam: np.ndarray, dtilde: np.ndarray) -> float:
    """Largest a with diag(lam) + a * dtilde PSD."""
    s = 1.0 / np.sqrt(lam)
    G = s[:, None] * dtilde * s[None, :]
    if not np.all(np.isfinite(G)):
        return 0.0
    rho = np.linalg.eigvalsh((G + G.T) / 2)[0]
    return np.inf if rho >= 0 else -1.0 / rho


def solve(prob: SdpProblem, tol: float = 1e-8, max_iter: int = 200) -> SdpSolution:
    """Solve ``prob``; see :class:`SdpSolution` for the status contract."""
    keep, consistent = _presolve(prob)
    full_m = prob.m
    if not consistent:
        return SdpSolution("primal_infeasible", [np.zeros((n, n)) for n in prob.block_dims],
                           np.zeros(full_m), [c.copy() for c in prob.C], np.zeros(prob.n_free),
                           np.nan, np.nan, np.inf, np.inf, np.inf, 0,
                           "linearly dependent constraints with inconsistent right-hand side")
    work = _restrict(prob, keep) if len(keep) < full_m else prob
    sol = _ipm(work, tol, max_iter)
    if len(keep) < full_m:
        y = np.zeros(full_m)
        y[keep] = sol.y
        sol.y = y
        sol.message = (sol.message + f"; dropped {full_m - len(keep)} dependent rows").lstrip("; ")
    return sol


def _ipm(prob: SdpProblem, tol: float, max_iter: int) -> SdpSolution:
    dims = prob.block_dims
    K = len(dims)
    m = prob.m
    nf = prob.n_free
    A = prob.A
    Aflat = [a.reshape(m, -1) for a in A]
    b, B, f, C = prob.b, prob.B, prob.f, prob.C
    ntot = sum(dims)

    def opA(Xs):
        out = np.zeros(m)
        for Af, X in zip(Aflat, Xs):
            out += Af @ X.ravel()
        return out

    def opAt(y):
        return [(y @ Af).reshape(n, n) for Af, n in zip(Aflat, dims)]

    normb = np.linalg.norm(b)
    normC = np.sqrt(sum(np.sum(c * c) for c in C) + f @ f)

    # SDPT3-style starting point
    X, S = [], []
    for k, n in enumerate(dims):
        an = np.linalg.norm(Aflat[k], axis=1)
        xi = max(10.0, np.sqrt(n), np.sqrt(n) * np.max((1 + np.abs(b)) / (1 + an)) if m else 10.0)
        eta = max(10.0, np.sqrt(n), np.max(an) if m else 0.0, np.linalg.norm(C[k]))
        X.append(xi * np.eye(n))
        S.append(eta * np.eye(n))
    y = np.zeros(m)
    u = np.zeros(nf)

    status = "max_iter"
    message = ""
    it = 0
    pobj = dobj = np.nan
    gap = pres = dres = np.inf
    for it in range(1, max_iter + 1):
        rp = b - opA(X) - B @ u
        Aty = opAt(y)
        Rd = [C[k] - S[k] - Aty[k] for k in range(K)]
        rf = f - B.T @ y
        mu = sum(np.sum(x * s) for x, s in zip(X, S)) / ntot
        pobj = sum(np.sum(c * x) for c, x in zip(C, X)) + f @ u
        dobj = b @ y
        gap = abs(pobj - dobj) / (1 + abs(pobj) + abs(dobj))
        pres = np.linalg.norm(rp) / (1 + normb)
        dres = np.sqrt(sum(np.sum(r * r) for r in Rd) + rf @ rf) / (1 + normC)
        compl = mu * ntot / (1 + abs(pobj) + abs(dobj))
        log.debug("it %d pobj %.6e dobj %.6e gap %.1e pres %.1e dres %.1e", it, pobj, dobj, gap, pres, dres)
        if gap <= tol and pres <= tol and dres <= tol and compl <= tol:
            status = "optimal"
            break
        if dobj > INFEASIBILITY_BOUND * max(1.0, normC) and dres < 1e-6 * max(1.0, abs(dobj)):
            status = "primal_infeasible"
            message = "dual objective unbounded along an improving direction"
            break
        if pobj < -INFEASIBILITY_BOUND * max(1.0, normb) and pres < 1e-6 * max(1.0, abs(pobj)):
            status = "dual_infeasible"
            message = "primal objective unbounded along an improving direction"
            break

        try:
            scal = [_nt_scaling(X[k], S[k]) for k in range(K)]
        except np.linalg.LinAlgError:
            message = "lost positive definiteness"
            break
        Ws = [R @ R.T for R, _, _ in scal]

        # Schur complement
        Msc = np.zeros((m, m))
        WAW = []
        for k in range(K):
            W = Ws[k]
            G = W @ A[k] @ W
            WAW.append(G.reshape(m, -1))
            Msc += Aflat[k] @ WAW[k].T
        Msc = (Msc + Msc.T) / 2
        if nf:
            KKT = np.block([[Msc, B], [B.T, np.zeros((nf, nf))]])
        else:
            KKT = Msc
        solve_kkt = _kkt_solver(KKT)

        AWRdW = np.zeros(m)
        for k in range(K):
            AWRdW += WAW[k] @ Rd[k].ravel()

        def direction(Rcs):
            # Rcs: scaled complementarity right-hand sides per block
            RZR = []
            h = rp.copy() + AWRdW
            for k in range(K):
                R, _, lam = scal[k]
                Z = 2 * Rcs[k] / (lam[:, None] + lam[None, :])
                T = R @ Z @ R.T
                RZR.append(T)
                h -= Aflat[k] @ T.ravel()
            rhs = np.concatenate([h, rf]) if nf else h
            sol = solve_kkt(rhs)
            dy = sol[:m]
            du = sol[m:]
            Atdy = opAt(dy)
            dS = [Rd[k] - Atdy[k] for k in range(K)]
            dX = [RZR[k] - Ws[k] @ dS[k] @ Ws[k] for k in range(K)]
            dX = [(d + d.T) / 2 for d in dX]
            dS = [(d + d.T) / 2 for d in dS]
            return dX, dy, dS, du

        def steps(dX, dS):
            ap = ad = np.inf
            dXt, dSt = [], []
            for k in range(K):
                R, Rinv, lam = scal[k]
                xt = Rinv @ dX[k] @ Rinv.T
                st = R.T @ dS[k] @ R
                dXt.append(xt)
                dSt.append(st)
                ap = min(ap, _max_step(lam, xt))
                ad = min(ad, _max_step(lam, st))
            return ap, ad, dXt, dSt

        # predictor
        Rc = [-np.diag(lam**2) for _, _, lam in scal]
        dX, dy, dS, du = direction(Rc)
        if not (np.all(np.isfinite(dy)) and all(np.all(np.isfinite(d)) for d in dX + dS)):
            message = "numerical breakdown in the search direction"
            break
        ap, ad, dXt, dSt = steps(dX, dS)
        ap1, ad1 = min(1.0, ap), min(1.0, ad)
        mu_aff = sum(np.sum((X[k] + ap1 * dX[k]) * (S[k] + ad1 * dS[k])) for k in range(K)) / ntot
        sigma = min(1.0, max(0.0, (mu_aff / mu) ** 3)) if mu > 0 else 0.0
        # corrector
        Rc = []
        for k in range(K):
            lam = scal[k][2]
            cross = (dXt[k] @ dSt[k] + dSt[k] @ dXt[k]) / 2
            Rc.append(sigma * mu * np.eye(dims[k]) - np.diag(lam**2) - cross)
        dX, dy, dS, du = direction(Rc)
        if not (np.all(np.isfinite(dy)) and all(np.all(np.isfinite(d)) for d in dX + dS)):
            message = "numerical breakdown in the search direction"
            break
        ap, ad, _, _ = steps(dX, dS)
        gamma = 0.9 + 0.09 * min(ap1, ad1)
        ap = min(1.0, gamma * ap)
        ad = min(1.0, gamma * ad)
        if ap < 1e-12 and ad < 1e-12:
            message = "step length underflow"
            break
        X = [X[k] + ap * dX[k] for k in range(K)]
        u = u + ap * du
        S = [S[k] + ad * dS[k] for k in range(K)]
        y = y + ad * dy
    else:
        message = message or "iteration limit reached"
    if status == "max_iter" and not message:
        message = "iteration limit reached"
    if status == "max_iter" and message:
        message = f"{message} (gap {gap:.1e}, pres {pres:.1e}, dres {dres:.1e})"
    return SdpSolution(status, X, y, S, u, float(pobj), float(dobj), float(gap), float(pres),
                       float(dres), it, message)


# -- SOS programs -------------------------------------------------------------------


def _gram_rows(target: Polynomial, blocks: Sequence[MonomialBasis], support_only: bool):
    system = gram_system(target, blocks)  # raises GramSystemError on unreachable monomials
    rows = list(system.rows)
    if support_only:
        rows = [r for r in rows if target.coeff(r) != 0]
    return system, rows


def _pattern_entries(blocks: Sequence[MonomialBasis], rows: Sequence[Monomial]):
    """For each row monomial, the ``(k, i, j)`` upper-triangle positions producing it."""
    index = {r: n for n, r in enumerate(rows)}
    ents: list[dict] = [dict() for _ in rows]
    for k, basis in enumerate(blocks):
        mons = basis.monomials
        for i in range(len(mons)):
            for j in range(i, len(mons)):
                r = index.get(monomial_mul(mons[i], mons[j]))
                if r is not None:
                    ents[r][(k, i, j)] = 1.0 if i == j else 2.0
    return ents


@dataclass
class SosResult:
    is_sos: bool
    t: float
    gram: list[np.ndarray]
    dual: np.ndarray
    rows: list[Monomial]
    blocks: list[MonomialBasis]
    solution: SdpSolution
    system: object = None
    tol: float = 1e-8

    def dual_pairing(self, poly: Polynomial) -> float:
        return float(sum(v * float(poly.coeff(r)) for v, r in zip(self.dual, self.rows)))

    def unit_dual(self) -> np.ndarray:
        n = np.linalg.norm(self.dual)
        return self.dual / n if n else self.dual

    def moment_matrix(self, vec: np.ndarray | None = None) -> list[np.ndarray]:
        vec = self.dual if vec is None else vec
        val = dict(zip(self.rows, vec))
        out = []
        for basis in self.blocks:
            n = len(basis)
            M = np.zeros((n, n))
            for i in range(n):
                for j in range(n):
                    M[i, j] = val.get(monomial_mul(basis[i], basis[j]), 0.0)
            out.append(M)
        return out


def sos_feasibility(target: Polynomial, blocks: Sequence[MonomialBasis], tol: float = 1e-8,
                    support_only: bool = False, max_iter: int = 200) -> SosResult:
    """Maximize the smallest Gram eigenvalue ``t`` subject to ``target = sum z^T Q z``.

    The dual returned is the functional ``v`` (over ``rows``) with PSD moment
    matrix and ``trace(moment matrix) = 1``; at optimum ``<v, target> = t``.
    With ``support_only`` the coefficient-matching rows off the support of
    ``target`` are dropped, so ``v`` lives on that support.

    The program is solved for ``target / max|coeff|``; the verdict compares
    that scaled ``t`` with ``-tol``, while ``t`` and ``gram`` are reported on
    the original scale.
    """
    blocks = [b for b in blocks if len(b)]
    if not blocks:
        ok = target.is_zero()
        dummy = SdpSolution("optimal", [], np.zeros(0), [], np.zeros(0), 0.0, 0.0, 0.0, 0.0, 0.0, 0)
        return SosResult(ok, 0.0 if ok else -np.inf, [], np.zeros(0), [], [], dummy, None, tol)
    system, rows = _gram_rows(target, blocks, support_only)
    ents = _pattern_entries(blocks, rows)
    scale = float(max((abs(c) for c in target.terms.values()), default=1)) or 1.0
    bld = SdpBuilder([len(b) for b in blocks], n_free=1)
    for r, e in zip(rows, ents):
        trace = sum(v for (k, i, j), v in e.items() if i == j)
        bld.add_row(e, {0: trace} if trace else None, float(target.coeff(r)) / scale)
    bld.f[0] = -1.0
    prob = bld.build()
    sol = solve(prob, tol=tol, max_iter=max_iter)
    ts = float(sol.u[0]) if sol.u.size else np.nan
    t = ts * scale
    gram = [(x + ts * np.eye(x.shape[0])) * scale for x in sol.X]
    if sol.status == "primal_infeasible":
        # target admits no Gram representation at all over these blocks
        is_sos = False
        t = -np.inf
    elif sol.status == "dual_infeasible":
        is_sos = True
    else:
        is_sos = ts >= -tol if sol.optimal else ts >= -1e-6
    dual = -sol.y
    return SosResult(bool(is_sos), t, gram, dual, rows, list(blocks), sol, system, tol)


@dataclass
class ProjectionResult:
    rows: list[Monomial]
    target: np.ndarray
    projection: np.ndarray
    distance: float
    hyperplane: np.ndarray
    gram: list[np.ndarray]
    blocks: list[MonomialBasis]
    solution: SdpSolution

    def projection_polynomial(self, nvars: int, max_denominator: int = 10**9) -> Polynomial:
        from fractions import Fraction

        return Polynomial(nvars, {
            r: Fraction(float(v)).limit_denominator(max_denominator)
            for r, v in zip(self.rows, self.projection) if abs(v) > 1e-12
        })


def project_onto_sos(target: Polynomial, blocks: Sequence[MonomialBasis] | None = None,
                     tol: float = 1e-8, max_iter: int = 200) -> ProjectionResult:
    """Closest SOS polynomial to ``target`` in the coefficient 2-norm.

    The norm bound ``||target - q|| <= tau`` is an arrow-shaped PSD block.
    ``hyperplane`` is ``(q - target) / ||q - target||``: nonnegative on the
    cone, negative on ``target`` (zero vector when ``target`` is SOS).
    Default blocks: the full basis of half-degree monomials.
    """
    if blocks is None:
        d = target.degree
        if target.is_form():
            blocks = [MonomialBasis(target.nvars, tuple(all_monomials(target.nvars, d // 2)))]
        else:
            mons = [m for k in range(d // 2 + 1) for m in all_monomials(target.nvars, k)]
            blocks = [MonomialBasis(target.nvars, tuple(mons))]
    blocks = [b for b in blocks if len(b)]
    rowset = {}
    for basis in blocks:
        for i in range(len(basis)):
            for j in range(i, len(basis)):
                rowset.setdefault(monomial_mul(basis[i], basis[j]), None)
    for mono in target.terms:
        rowset.setdefault(mono, None)
    from .polycore import basis_key

    rows = sorted(rowset, key=basis_key)
    N = len(rows)
    ents = _pattern_entries(blocks, rows)
    K = len(blocks)
    arrow = K  # index of the arrow block, size N + 1
    bld = SdpBuilder([len(b) for b in blocks] + [N + 1])
    tvec = np.array([float(target.coeff(r)) for r in rows])
    for a, (r, e) in enumerate(zip(rows, ents)):
        row = dict(e)
        row[(arrow, 0, a + 1)] = 1.0
        bld.add_row(row, None, tvec[a])
    for a in range(1, N + 1):
        bld.add_row({(arrow, a, a): 1.0, (arrow, 0, 0): -1.0}, None, 0.0)
    for a in range(1, N + 1):
        for c in range(a + 1, N + 1):
            bld.add_row({(arrow, a, c): 1.0}, None, 0.0)
    bld.C[arrow][0, 0] = 1.0
    prob = bld.build()
    sol = solve(prob, tol=tol, max_iter=max_iter)
    gram = [sol.X[k] for k in range(K)]
    qvec = np.zeros(N)
    for a, e in enumerate(ents):
        qvec[a] = sum(v * gram[k][i, j] for (k, i, j), v in e.items())
    diff = qvec - tvec
    dist = float(np.linalg.norm(diff))
    scale = max(1.0, float(np.linalg.norm(tvec)))
    hyper = diff / dist if dist > 1e-7 * scale else np.zeros(N)
    return ProjectionResult(rows, tvec, qvec, dist, hyper, gram, list(blocks), sol)


@dataclass
class SeparatorResult:
    functional: np.ndarray  # over rows
    rows: list[Monomial]
    blocks: list[MonomialBasis]
    min_moment_eig: float
    pairing: float
    solution: SdpSolution


def interior_separator(target: Polynomial, blocks: Sequence[MonomialBasis], pairing_goal: float,
                       support_only: bool = True, tol: float = 1e-8,
                       max_iter: int = 200) -> SeparatorResult:
    """Dual functional deep inside the dual cone with ``<v, target> <= pairing_goal``.

    Maximizes the smallest eigenvalue of the moment matrix ``M(v)`` subject to
    ``trace M(v) = 1``. Solving for an interior point (rather than reading the
    boundary dual of :func:`sos_feasibility`) leaves room for exact rounding.
    """
    blocks = [b for b in blocks if len(b)]
    system, rows = _gram_rows(target, blocks, support_only)
    index = {r: n for n, r in enumerate(rows)}
    nv = len(rows)
    s_col = nv
    # blocks: moment blocks then one scalar slack for the pairing inequality
    bld = SdpBuilder([len(b) for b in blocks] + [1], n_free=nv + 1)
    trace_coeffs: dict[int, float] = {}
    for k, basis in enumerate(blocks):
        mons = basis.monomials
        for i in range(len(mons)):
            for j in range(i, len(mons)):
                free = {}
                r = index.get(monomial_mul(mons[i], mons[j]))
                if r is not None:
                    free[r] = -1.0
                    if i == j:
                        trace_coeffs[r] = trace_coeffs.get(r, 0.0) + 1.0
                if i == j:
                    free[s_col] = 1.0
                bld.add_row({(k, i, j): 1.0}, free, 0.0)
    K = len(blocks)
    pair = {index[r]: float(target.coeff(r)) for r in rows if target.coeff(r) != 0}
    bld.add_row({(K, 0, 0): 1.0}, pair, pairing_goal)
    bld.add_row(None, trace_coeffs, 1.0)
    bld.f[s_col] = -1.0
    prob = bld.build()
    sol = solve(prob, tol=tol, max_iter=max_iter)
    v = sol.u[:nv].copy()
    s = float(sol.u[s_col])
    pairing = float(sum(v[index[r]] * float(target.coeff(r)) for r in rows))
    return SeparatorResult(v, rows, list(blocks), s, pairing, sol)


def random_sdp(rng, block_dims: Sequence[int], m: int) -> tuple[SdpProblem, list[np.ndarray]]:
    """Random strictly feasible SDP with bounded dual (test helper).

    ``b`` comes from a known PD point and ``C`` is PD, so both problems have
    interior points and the optimum is attained.
    """
    A = []
    for n in block_dims:
        G = rng.standard_normal((m, n, n))
        A.append((G + G.transpose(0, 2, 1)) / 2)
    X0 = []
    for n in block_dims:
        G = rng.standard_normal((n, n))
        X0.append(G @ G.T + n * np.eye(n))
    b = sum(A[k].reshape(m, -1) @ X0[k].ravel() for k in range(len(block_dims)))
    C = []
    for n in block_dims:
        G = rng.standard_normal((n, n))
        C.append(G @ G.T / n + np.eye(n))
    return SdpProblem(list(block_dims), C, A, b), X0
