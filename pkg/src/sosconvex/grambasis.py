"""Monomial bases, Gram-matrix systems and exact certificate checking.

Everything here is exact (``fractions.Fraction``) except the numeric
matrices handed to :func:`rationalize_gram`, which come from the solver.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

import numpy as np

from .polycore import (
    Monomial,
    Polynomial,
    _format_coeff,
    all_monomials,
    basis_key,
    monomial_mul,
    polynomial_from_dict,
    polynomial_to_dict,
    sum_of_squares_multiplier,
)

RationalMatrix = list[list[Fraction]]


class GramSystemError(ValueError):
    """A target monomial cannot be produced by any product of basis elements."""

    def __init__(self, monomial: Monomial):
        super().__init__(f"target monomial {monomial} is not reachable from the basis")
        self.monomial = monomial


class RationalizationError(ValueError):
    pass


class NotPSDError(ValueError):
    pass


@dataclass(frozen=True)
class MonomialBasis:
    nvars: int
    monomials: tuple[Monomial, ...]

    def __post_init__(self):
        mons = tuple(tuple(m) for m in self.monomials)
        if len(set(mons)) != len(mons):
            raise ValueError("duplicate monomials in basis")
        for m in mons:
            if len(m) != self.nvars:
                raise ValueError(f"monomial {m} has wrong length")
        object.__setattr__(self, "monomials", mons)

    @classmethod
    def sorted(cls, nvars: int, monomials) -> "MonomialBasis":
        return cls(nvars, tuple(sorted(set(map(tuple, monomials)), key=basis_key)))

    def __len__(self) -> int:
        return len(self.monomials)

    def __iter__(self):
        return iter(self.monomials)

    def __getitem__(self, i):
        return self.monomials[i]

    def index(self, m: Monomial) -> int:
        return self.monomials.index(tuple(m))

    def polynomials(self) -> list[Polynomial]:
        return [Polynomial.monomial(m) for m in self.monomials]


def monomial_basis(nvars: int, max_deg: int, homogeneous: bool = False) -> MonomialBasis:
    if max_deg < 0:
        raise ValueError("max_deg must be nonnegative")
    degrees = [max_deg] if homogeneous else range(max_deg + 1)
    mons = [m for d in degrees for m in all_monomials(nvars, d)]
    return MonomialBasis(nvars, tuple(mons))


# -- Newton polytope ---------------------------------------------------------


def _rref(rows: list[list[Fraction]]) -> tuple[list[list[Fraction]], list[int]]:
    rows = [list(r) for r in rows]
    pivots = []
    r = 0
    ncols = len(rows[0]) if rows else 0
    for c in range(ncols):
        piv = next((i for i in range(r, len(rows)) if rows[i][c] != 0), None)
        if piv is None:
            continue
        rows[r], rows[piv] = rows[piv], rows[r]
        inv = 1 / rows[r][c]
        rows[r] = [v * inv for v in rows[r]]
        for i in range(len(rows)):
            if i != r and rows[i][c] != 0:
                f = rows[i][c]
                rows[i] = [a - f * b for a, b in zip(rows[i], rows[r])]
        pivots.append(c)
        r += 1
        if r == len(rows):
            break
    return rows[:r], pivots


def _nullspace(rows: list[list[Fraction]], ncols: int) -> list[list[Fraction]]:
    if not rows:
        return [[Fraction(int(i == j)) for j in range(ncols)] for i in range(ncols)]
    red, pivots = _rref(rows)
    free = [c for c in range(ncols) if c not in pivots]
    basis = []
    for f in free:
        v = [Fraction(0)] * ncols
        v[f] = Fraction(1)
        for row, pc in zip(red, pivots):
            v[pc] = -row[f]
        basis.append(v)
    return basis


def in_convex_hull(point: Sequence[int], points: Sequence[Sequence[int]]) -> bool:
    """Exact test of ``point`` in conv(points) via a phase-one simplex over Q.

    Solves ``V lam = point, sum(lam) = 1, lam >= 0`` with Bland's rule, so
    there is no floating-point tolerance anywhere.
    """
    pts = [tuple(p) for p in points]
    target = tuple(point)
    if target in set(pts):
        return True
    d = len(target)
    nrows = d + 1
    ncols = len(pts)
    # rows: coordinates then the convexity row; make the rhs nonnegative
    A = [[Fraction(p[i]) for p in pts] for i in range(d)] + [[Fraction(1)] * ncols]
    b = [Fraction(t) for t in target] + [Fraction(1)]
    for i in range(nrows):
        if b[i] < 0:
            A[i] = [-v for v in A[i]]
            b[i] = -b[i]
    # tableau with artificials in columns ncols .. ncols + nrows - 1
    T = [A[i] + [Fraction(int(i == k)) for k in range(nrows)] + [b[i]] for i in range(nrows)]
    basis = [ncols + i for i in range(nrows)]
    total = ncols + nrows
    # reduced costs for minimizing the sum of artificials
    cost = [Fraction(0)] * ncols + [Fraction(1)] * nrows + [Fraction(0)]
    obj = list(cost)
    for i in range(nrows):
        obj = [o - t for o, t in zip(obj, T[i])]
    while True:
        enter = next((j for j in range(total) if obj[j] < 0), None)
        if enter is None:
            break
        best = None
        for i in range(nrows):
            a = T[i][enter]
            if a > 0:
                ratio = T[i][-1] / a
                if best is None or ratio < best[0] or (ratio == best[0] and basis[i] < basis[best[1]]):
                    best = (ratio, i)
        if best is None:  # unbounded cannot happen in phase one
            break
        r = best[1]
        piv = T[r][enter]
        T[r] = [v / piv for v in T[r]]
        for i in range(nrows):
            if i != r and T[i][enter] != 0:
                f = T[i][enter]
                T[i] = [a - f * c for a, c in zip(T[i], T[r])]
        f = obj[enter]
        obj = [a - f * c for a, c in zip(obj, T[r])]
        basis[r] = enter
    return -obj[-1] == 0


class NewtonPolytope:
    """Exact membership oracle for the Newton polytope of a polynomial."""

    def __init__(self, target: Polynomial):
        self.points = [tuple(m) for m in target.terms]
        self.nvars = target.nvars
        self._set = set(self.points)
        self._lo = [min(p[i] for p in self.points) for i in range(self.nvars)] if self.points else []
        self._hi = [max(p[i] for p in self.points) for i in range(self.nvars)] if self.points else []
        # affine hull equations a.x = c satisfied by every support point
        if self.points:
            p0 = self.points[0]
            diffs = [[Fraction(a - b) for a, b in zip(p, p0)] for p in self.points[1:]]
            normals = _nullspace([r for r in diffs if any(r)], self.nvars)
            self._eqs = [(n, sum(a * b for a, b in zip(n, p0))) for n in normals]
        else:
            self._eqs = []
        self._cache: dict[tuple, bool] = {}

    def contains(self, point: Sequence[int]) -> bool:
        pt = tuple(point)
        if pt in self._cache:
            return self._cache[pt]
        if not self.points:
            res = False
        elif pt in self._set:
            res = True
        elif any(v < lo or v > hi for v, lo, hi in zip(pt, self._lo, self._hi)):
            res = False
        elif any(sum(a * v for a, v in zip(n, pt)) != c for n, c in self._eqs):
            res = False
        else:
            res = in_convex_hull(pt, self.points)
        self._cache[pt] = res
        return res


def newton_filter(target: Polynomial, basis: MonomialBasis) -> MonomialBasis:
    """Keep basis monomials whose doubled exponent lies in the Newton polytope."""
    if basis.nvars != target.nvars:
        raise ValueError("basis and target disagree on nvars")
    poly = NewtonPolytope(target)
    kept = tuple(m for m in basis if poly.contains(tuple(2 * e for e in m)))
    return MonomialBasis(basis.nvars, kept)


def half_degree_basis(target: Polynomial) -> MonomialBasis:
    """Candidate Gram basis: monomials of half the target's degree range, box-pruned."""
    if target.is_zero():
        return MonomialBasis(target.nvars, ())
    hi, lo = target.degree, target.min_degree()
    dmax = hi // 2
    dmin = (lo + 1) // 2
    n = target.nvars
    cap = [max(m[i] for m in target.terms) // 2 for i in range(n)]
    floor = [(min(m[i] for m in target.terms) + 1) // 2 for i in range(n)]
    mons = [
        m
        for d in range(dmin, dmax + 1)
        for m in all_monomials(n, d)
        if all(floor[i] <= m[i] <= cap[i] for i in range(n))
    ]
    return MonomialBasis(n, tuple(mons))


def sos_basis(target: Polynomial) -> MonomialBasis:
    """Newton-filtered candidate basis for a Gram representation of ``target``."""
    return newton_filter(target, half_degree_basis(target))


# -- symmetry (parity) splitting ----------------------------------------------


def _signature(m: Monomial, groups: Sequence[Sequence[int]]) -> tuple[int, ...]:
    return tuple(sum(m[v] for v in g) % 2 for g in groups)


def parity_split(basis: MonomialBasis, group_vars: Sequence[Sequence[int]]) -> list[MonomialBasis]:
    """Bucket a basis by the parity of its combined degree in each variable group.

    ``group_vars`` must partition ``range(basis.nvars)``. Blocks come out in
    order of first appearance of their signature in the basis.
    """
    flat = sorted(v for g in group_vars for v in g)
    if flat != list(range(basis.nvars)):
        raise ValueError("group_vars must partition the variables")
    buckets: dict[tuple, list[Monomial]] = {}
    for m in basis:
        buckets.setdefault(_signature(m, group_vars), []).append(m)
    return [MonomialBasis(basis.nvars, tuple(ms)) for ms in buckets.values()]


def signature_label(block: MonomialBasis, group_vars: Sequence[Sequence[int]]) -> str:
    sig = _signature(block.monomials[0], group_vars)
    return "".join("O" if s else "E" for s in sig)


def sign_symmetries(target: Polynomial) -> list[tuple[int, ...]]:
    """Generators (over GF(2)) of the coordinate sign flips leaving ``target`` invariant."""
    n = target.nvars
    rows = [sum(((e & 1) << i) for i, e in enumerate(m)) for m in target.terms]
    # reduce rows to echelon form over GF(2)
    pivots: dict[int, int] = {}
    for r in rows:
        for bit in range(n):
            if not (r >> bit) & 1:
                continue
            if bit in pivots:
                r ^= pivots[bit]
            else:
                pivots[bit] = r
                break
    # fully reduce
    for bit in sorted(pivots):
        for other in list(pivots):
            if other != bit and (pivots[other] >> bit) & 1:
                pivots[other] ^= pivots[bit]
    free = [b for b in range(n) if b not in pivots]
    gens = []
    for f in free:
        s = [0] * n
        s[f] = 1
        for bit, row in pivots.items():
            if (row >> f) & 1:
                s[bit] = 1
        gens.append(tuple(s))
    return gens


def symmetry_split(target: Polynomial, basis: MonomialBasis) -> list[MonomialBasis]:
    """Split ``basis`` into isotypic blocks of the sign symmetries of ``target``."""
    gens = sign_symmetries(target)
    buckets: dict[tuple, list[Monomial]] = {}
    for m in basis:
        key = tuple(sum(a * b for a, b in zip(s, m)) % 2 for s in gens)
        buckets.setdefault(key, []).append(m)
    return [MonomialBasis(basis.nvars, tuple(ms)) for ms in buckets.values()]


def sos_blocks(target: Polynomial, split: bool = True) -> list[MonomialBasis]:
    basis = sos_basis(target)
    if not len(basis):
        return []
    return symmetry_split(target, basis) if split else [basis]


# -- Gram linear systems ------------------------------------------------------


@dataclass
class LinearSystem:
    """Coefficient-matching equations ``sum_c A[r][c] q_c = b[r]``.

    Columns are upper-triangle Gram entries ``(block, i, j)`` with ``i <= j``;
    an off-diagonal entry enters its row with coefficient 2.
    """

    rows: list[Monomial]
    columns: list[tuple[int, int, int]]
    A: list[dict[int, Fraction]]
    b: list[Fraction]
    block_sizes: list[int]
    row_index: dict[Monomial, int] = field(default_factory=dict)

    def dense(self) -> np.ndarray:
        M = np.zeros((len(self.rows), len(self.columns)))
        for r, row in enumerate(self.A):
            for c, v in row.items():
                M[r, c] = float(v)
        return M

    def residual(self, blocks: Sequence[RationalMatrix]) -> list[Fraction]:
        out = []
        for r, row in enumerate(self.A):
            s = Fraction(0)
            for c, v in row.items():
                k, i, j = self.columns[c]
                s += v * blocks[k][i][j]
            out.append(self.b[r] - s)
        return out


def gram_system(target: Polynomial, blocks: Sequence[MonomialBasis]) -> LinearSystem:
    rows: list[Monomial] = []
    row_index: dict[Monomial, int] = {}
    columns = []
    A: list[dict[int, Fraction]] = []
    for k, basis in enumerate(blocks):
        if basis.nvars != target.nvars:
            raise ValueError("block and target disagree on nvars")
        mons = basis.monomials
        for i in range(len(mons)):
            for j in range(i, len(mons)):
                prod = monomial_mul(mons[i], mons[j])
                if prod not in row_index:
                    row_index[prod] = len(rows)
                    rows.append(prod)
                    A.append({})
                c = len(columns)
                columns.append((k, i, j))
                A[row_index[prod]][c] = Fraction(1 if i == j else 2)
    for m in target.terms:
        if m not in row_index:
            raise GramSystemError(m)
    b = [target.coeff(m) for m in rows]
    return LinearSystem(rows, columns, A, b, [len(bk) for bk in blocks], row_index)


# -- certificates -------------------------------------------------------------


def _parse_q(v) -> Fraction:
    return Fraction(str(v))


@dataclass
class GramBlock:
    basis: MonomialBasis
    Q: RationalMatrix

    def __post_init__(self):
        n = len(self.basis)
        self.Q = [[_parse_q(v) if not isinstance(v, Fraction) else v for v in row] for row in self.Q]
        if len(self.Q) != n or any(len(r) != n for r in self.Q):
            raise ValueError("Gram matrix size does not match its basis")
        for i in range(n):
            for j in range(i + 1, n):
                if self.Q[i][j] != self.Q[j][i]:
                    raise ValueError(f"Gram matrix not symmetric at ({i}, {j})")


@dataclass
class GramCertificate:
    """Claims ``m(x)^r * target = sum_blocks z^T Q z`` with every ``Q`` PSD.

    The multiplier is ``m(x) = multiplier_offset + x_1^2 + ... + x_k^2`` with
    ``k = multiplier_vars`` (default: every variable of ``target``).
    """

    target: Polynomial
    blocks: list[GramBlock]
    multiplier_r: int = 0
    multiplier_vars: int | None = None
    multiplier_offset: int = 0

    def multiplier(self) -> Polynomial:
        return sum_of_squares_multiplier(
            self.target.nvars, self.multiplier_r, self.multiplier_vars, self.multiplier_offset
        )

    def multiplied_target(self) -> Polynomial:
        if self.multiplier_r == 0:
            return self.target
        return self.multiplier() * self.target

    def to_dict(self) -> dict:
        doc = {
            "kind": "gram_certificate",
            "target": polynomial_to_dict(self.target),
            "multiplier_r": self.multiplier_r,
            "blocks": [
                {
                    "monomials": [list(m) for m in blk.basis],
                    "Q": [[_format_coeff(v) for v in row] for row in blk.Q],
                }
                for blk in self.blocks
            ],
        }
        if self.multiplier_vars is not None:
            doc["multiplier_vars"] = self.multiplier_vars
        if self.multiplier_offset:
            doc["multiplier_offset"] = self.multiplier_offset
        return doc

    @classmethod
    def from_dict(cls, doc: dict) -> "GramCertificate":
        target = polynomial_from_dict(doc["target"])
        blocks = [
            GramBlock(MonomialBasis(target.nvars, tuple(tuple(m) for m in b["monomials"])), b["Q"])
            for b in doc["blocks"]
        ]
        return cls(
            target,
            blocks,
            int(doc.get("multiplier_r", 0)),
            doc.get("multiplier_vars"),
            int(doc.get("multiplier_offset", 0)),
        )


def expand_gram(cert: GramCertificate) -> Polynomial:
    """``sum_blocks z^T Q z`` as an exact polynomial (multiplier not applied)."""
    out: dict[Monomial, Fraction] = {}
    for blk in cert.blocks:
        mons = blk.basis.monomials
        Q = blk.Q
        for i in range(len(mons)):
            qi = Q[i]
            if qi[i]:
                m = monomial_mul(mons[i], mons[i])
                out[m] = out.get(m, 0) + qi[i]
            for j in range(i + 1, len(mons)):
                if qi[j]:
                    m = monomial_mul(mons[i], mons[j])
                    out[m] = out.get(m, 0) + 2 * qi[j]
    return Polynomial(cert.target.nvars, out)


# -- exact LDL^T ----------------------------------------------------------------


@dataclass
class LdlResult:
    """``P^T Q P = L D L^T`` where ``perm[k]`` is the row of Q used at step k."""

    perm: list[int]
    L: RationalMatrix
    D: list[Fraction]
    rank: int
    verdict: str  # "pd", "psd" or "indefinite"
    failure: str | None = None

    @property
    def is_psd(self) -> bool:
        return self.verdict in ("pd", "psd")

    @property
    def is_pd(self) -> bool:
        return self.verdict == "pd"


def rational_psd_check(Q: Sequence[Sequence]) -> LdlResult:
    """Exact semidefinite LDL^T with largest-diagonal pivoting."""
    n = len(Q)
    A = [[v if isinstance(v, Fraction) else Fraction(v) for v in row] for row in Q]
    if any(len(r) != n for r in A):
        raise ValueError("matrix must be square")
    for i in range(n):
        for j in range(i + 1, n):
            if A[i][j] != A[j][i]:
                raise ValueError(f"matrix not symmetric at ({i}, {j})")
    perm = list(range(n))
    L = [[Fraction(int(i == j)) for j in range(n)] for i in range(n)]
    D: list[Fraction] = []
    for k in range(n):
        piv = max(range(k, n), key=lambda i: A[i][i])
        if A[piv][piv] <= 0:
            if A[piv][piv] < 0:
                verdict, why = "indefinite", f"negative pivot {A[piv][piv]} at step {k}"
            else:
                nz = next(
                    ((i, j) for i in range(k, n) for j in range(k, n) if A[i][j] != 0), None
                )
                if nz is None:
                    D.extend([Fraction(0)] * (n - k))
                    return LdlResult(perm, L, D, k, "psd")
                verdict = "indefinite"
                why = f"zero pivot with nonzero entry at step {k} (rows {perm[nz[0]]}, {perm[nz[1]]})"
            D.extend([Fraction(0)] * (n - k))
            return LdlResult(perm, L, D, k, verdict, why)
        if piv != k:
            A[k], A[piv] = A[piv], A[k]
            for row in A:
                row[k], row[piv] = row[piv], row[k]
            perm[k], perm[piv] = perm[piv], perm[k]
            for j in range(k):
                L[k][j], L[piv][j] = L[piv][j], L[k][j]
        d = A[k][k]
        D.append(d)
        for i in range(k + 1, n):
            L[i][k] = A[i][k] / d
        for i in range(k + 1, n):
            lik = L[i][k]
            if lik == 0:
                continue
            for j in range(k + 1, i + 1):
                A[i][j] -= lik * A[k][j]
                A[j][i] = A[i][j]
    return LdlResult(perm, L, D, n, "pd")


# -- verification -------------------------------------------------------------


@dataclass
class VerificationReport:
    identity_ok: bool
    mismatch: tuple[Monomial, Fraction, Fraction] | None
    blocks: list[LdlResult]
    passed: bool

    def summary(self) -> str:
        lines = []
        if self.identity_ok:
            lines.append("coefficient identity: exact match")
        else:
            m, want, got = self.mismatch
            lines.append(f"coefficient identity: FAILS at monomial {list(m)}: expected {want}, Gram gives {got}")
        for k, res in enumerate(self.blocks):
            pivots = ", ".join(str(d) for d in res.D)
            lines.append(f"block {k + 1} ({len(res.D)}x{len(res.D)}): {res.verdict.upper()}; pivots [{pivots}]")
            if res.failure:
                lines.append(f"  {res.failure}")
        lines.append("PASS" if self.passed else "FAIL")
        return "\n".join(lines)


def first_mismatch(want: Polynomial, got: Polynomial):
    diff = want - got
    if diff.is_zero():
        return None
    m = diff.monomials()[0]
    return m, want.coeff(m), got.coeff(m)


def verify_certificate(cert: GramCertificate) -> VerificationReport:
    want = cert.multiplied_target()
    got = expand_gram(cert)
    mismatch = first_mismatch(want, got)
    checks = [rational_psd_check(b.Q) for b in cert.blocks]
    ok = mismatch is None and all(c.is_psd for c in checks)
    return VerificationReport(mismatch is None, mismatch, checks, ok)


def extract_sos_decomposition(cert: GramCertificate) -> list[list[tuple[Fraction, Polynomial]]]:
    """Weighted squares ``d_k * q_k^2`` per block, from the exact LDL^T factors."""
    out = []
    n = cert.target.nvars
    for k, blk in enumerate(cert.blocks):
        res = rational_psd_check(blk.Q)
        if not res.is_psd:
            raise NotPSDError(f"block {k + 1} is not PSD: {res.failure}")
        mons = blk.basis.monomials
        squares = []
        for col in range(res.rank):
            terms = {}
            for i in range(col, len(mons)):
                lik = res.L[i][col]
                if lik:
                    terms[mons[res.perm[i]]] = lik
            squares.append((res.D[col], Polynomial(n, terms)))
        out.append(squares)
    return out


def sum_weighted_squares(decomp, nvars: int) -> Polynomial:
    total = Polynomial.zero(nvars)
    for block in decomp:
        for w, q in block:
            total = total + (q * q).scale(w)
    return total


# -- rationalization ------------------------------------------------------------


def _solve_consistent(N: list[dict[int, Fraction]], rhs: list[Fraction]) -> list[Fraction]:
    """Exact solve of a (possibly singular but consistent) sparse square system."""
    n = len(N)
    rows = [dict(r) for r in N]
    b = list(rhs)
    where: dict[int, int] = {}
    used = [False] * n
    order = []
    for col in range(n):
        piv = None
        for r in range(n):
            if not used[r] and rows[r].get(col, 0) != 0:
                if piv is None or len(rows[r]) < len(rows[piv]):
                    piv = r
        if piv is None:
            continue
        used[piv] = True
        where[col] = piv
        order.append(col)
        pv = rows[piv][col]
        for r in range(n):
            if r != piv and rows[r].get(col, 0) != 0:
                f = rows[r][col] / pv
                for c, v in rows[piv].items():
                    nv = rows[r].get(c, 0) - f * v
                    if nv:
                        rows[r][c] = nv
                    else:
                        rows[r].pop(c, None)
                b[r] -= f * b[piv]
    for r in range(n):
        if not used[r] and b[r] != 0:
            raise RationalizationError("projection onto the affine Gram space is infeasible")
    x = [Fraction(0)] * n
    for col in order:
        r = where[col]
        x[col] = b[r] / rows[r][col]
    return x


def _round_matrix(Qf: np.ndarray, denom: int) -> RationalMatrix:
    n = Qf.shape[0]
    S = (Qf + Qf.T) / 2
    return [[Fraction(int(round(S[i, j] * denom)), denom) for j in range(n)] for i in range(n)]


def _rational_kernel(Qf: np.ndarray, rel_tol: float, max_denominator: int = 10_000):
    """Rational spanning rows for the numerical null space of ``Qf`` (may be empty)."""
    w, V = np.linalg.eigh((Qf + Qf.T) / 2)
    scale = max(1.0, float(np.max(np.abs(w))))
    null = V[:, w < rel_tol * scale]
    if null.shape[1] == 0:
        return []
    K = null.T.copy()
    # numeric RREF with partial pivoting on columns
    k, n = K.shape
    pivcols = []
    r = 0
    for c in range(n):
        if r == k:
            break
        piv = r + int(np.argmax(np.abs(K[r:, c])))
        if abs(K[piv, c]) < 1e-8:
            continue
        K[[r, piv]] = K[[piv, r]]
        K[r] /= K[r, c]
        for i in range(k):
            if i != r:
                K[i] -= K[i, c] * K[r]
        pivcols.append(c)
        r += 1
    return [[Fraction(float(v)).limit_denominator(max_denominator) for v in row] for row in K[:r]]


def project_gram(blocks: list[RationalMatrix], system: LinearSystem,
                 kernels: Sequence[Sequence[Sequence[Fraction]]] | None = None) -> list[RationalMatrix]:
    """Exact Frobenius-orthogonal projection onto ``{Q : system holds, Q v = 0 for kernel v}``."""
    ncol = len(system.columns)
    weight = [Fraction(1) if i == j else Fraction(2) for (_, i, j) in system.columns]
    col_of: dict[tuple[int, int, int], int] = {c: idx for idx, c in enumerate(system.columns)}
    rows = [dict(r) for r in system.A]
    rhs = list(system.b)
    if kernels:
        for k, vecs in enumerate(kernels):
            n = system.block_sizes[k]
            for v in vecs:
                for i in range(n):
                    row: dict[int, Fraction] = {}
                    for j in range(n):
                        if v[j]:
                            c = col_of[(k, min(i, j), max(i, j))]
                            row[c] = row.get(c, 0) + v[j]
                    row = {c: a for c, a in row.items() if a}
                    if row:
                        rows.append(row)
                        rhs.append(Fraction(0))
    q = [blocks[k][i][j] for (k, i, j) in system.columns]
    res = []
    for row, bb in zip(rows, rhs):
        res.append(bb - sum(a * q[c] for c, a in row.items()))
    if not any(res):
        return [[list(r) for r in blk] for blk in blocks]
    # normal equations N lam = res with N = A W^{-1} A^T
    by_col: dict[int, list[tuple[int, Fraction]]] = {}
    for r, row in enumerate(rows):
        for c, a in row.items():
            by_col.setdefault(c, []).append((r, a))
    N: list[dict[int, Fraction]] = [dict() for _ in rows]
    for c, entries in by_col.items():
        w = weight[c]
        for r1, a1 in entries:
            for r2, a2 in entries:
                N[r1][r2] = N[r1].get(r2, 0) + a1 * a2 / w
    lam = _solve_consistent(N, res)
    delta = [Fraction(0)] * ncol
    for c, entries in by_col.items():
        s = sum(a * lam[r] for r, a in entries)
        delta[c] = s / weight[c]
    out = [[list(r) for r in blk] for blk in blocks]
    for idx, (k, i, j) in enumerate(system.columns):
        if delta[idx]:
            out[k][i][j] += delta[idx]
            if i != j:
                out[k][j][i] = out[k][i][j]
    return out


def rationalize_gram(Q_float: Sequence[np.ndarray], system: LinearSystem,
                     denominator_bound: int = 10**6, max_bound: int = 10**12,
                     kernel_tol: float = 1e-7) -> list[RationalMatrix]:
    """Round, project exactly onto the Gram equations, and demand exact PSD.

    Rounds to a fixed denominator, doubling it on failure up to ``max_bound``.
    When a block is numerically singular, its rationalized null vectors are
    added as exact constraints ``Q v = 0`` so that rounding noise cannot push
    a zero eigenvalue negative.
    """
    mats = [np.asarray(q, dtype=float) for q in Q_float]
    kernels = [_rational_kernel(q, kernel_tol) if q.size else [] for q in mats]
    has_kernel = any(kernels)
    denom = denominator_bound
    last_err = "no attempt"
    while denom <= max_bound:
        rounded = [_round_matrix(q, denom) for q in mats]
        attempts = [None, kernels] if has_kernel else [None]
        for kern in attempts:
            try:
                proj = project_gram(rounded, system, kern)
            except RationalizationError as exc:
                last_err = str(exc)
                continue
            checks = [rational_psd_check(b) for b in proj]
            if all(c.is_psd for c in checks):
                return proj
            bad = next(i for i, c in enumerate(checks) if not c.is_psd)
            last_err = f"block {bad + 1} not PSD after projection ({checks[bad].failure})"
        denom *= 2
    raise RationalizationError(last_err)


def certificate_from_blocks(target: Polynomial, bases: Sequence[MonomialBasis],
                            mats: Sequence[RationalMatrix], r: int = 0,
                            multiplier_vars: int | None = None,
                            multiplier_offset: int = 0) -> GramCertificate:
    return GramCertificate(
        target,
        [GramBlock(b, m) for b, m in zip(bases, mats)],
        r,
        multiplier_vars,
        multiplier_offset,
    )
