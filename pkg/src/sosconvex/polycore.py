"""Exact sparse multivariate polynomials over the rationals.

A :class:`Polynomial` is an immutable map from exponent tuples to
:class:`fractions.Fraction` coefficients. Variables are plain indices;
names only matter when parsing or printing.
"""

from __future__ import annotations

import re
from fractions import Fraction
from types import MappingProxyType
from typing import Iterable, Mapping, Sequence

Monomial = tuple[int, ...]
RationalLike = int | Fraction | str


def to_rational(value: RationalLike) -> Fraction:
    """Coerce ints, Fractions and ``"a/b"`` / decimal strings to a Fraction."""
    if isinstance(value, Fraction):
        return value
    if isinstance(value, bool):
        raise TypeError("bool is not a coefficient")
    if isinstance(value, (int, str)):
        return Fraction(value)
    raise TypeError(f"expected an exact rational, got {type(value).__name__}")


def monomial_degree(m: Monomial) -> int:
    return sum(m)


def basis_key(m: Monomial) -> tuple:
    """Graded-lex sort key: ascending degree, x1 before x2 within a degree."""
    return (sum(m), tuple(-e for e in m))


def print_key(m: Monomial) -> tuple:
    """Key for printing: highest degree first, then the same lex order."""
    return (-sum(m), tuple(-e for e in m))


def monomial_mul(a: Monomial, b: Monomial) -> Monomial:
    return tuple(x + y for x, y in zip(a, b))


def default_names(nvars: int) -> list[str]:
    return [f"x{i + 1}" for i in range(nvars)]


class PolynomialError(ValueError):
    pass


class ParseError(PolynomialError):
    def __init__(self, message: str, position: int):
        super().__init__(f"{message} at position {position}")
        self.position = position


class Polynomial:
    """Immutable sparse polynomial in ``nvars`` variables with rational coefficients."""

    __slots__ = ("_nvars", "_terms", "_hash")

    def __init__(self, nvars: int, terms: Mapping[Monomial, RationalLike] | Iterable = ()):
        if nvars < 1:
            raise PolynomialError("nvars must be positive")
        items = terms.items() if isinstance(terms, Mapping) else terms
        clean: dict[Monomial, Fraction] = {}
        for mono, coeff in items:
            mono = tuple(int(e) for e in mono)
            if len(mono) != nvars:
                raise PolynomialError(f"monomial {mono} does not have {nvars} exponents")
            if any(e < 0 for e in mono):
                raise PolynomialError(f"negative exponent in {mono}")
            c = to_rational(coeff)
            if c:
                c = clean.get(mono, Fraction(0)) + c
                if c:
                    clean[mono] = c
                else:
                    clean.pop(mono, None)
        self._nvars = nvars
        self._terms = clean
        self._hash = None

    # -- constructors ------------------------------------------------------

    @classmethod
    def zero(cls, nvars: int) -> "Polynomial":
        return cls(nvars)

    @classmethod
    def constant(cls, nvars: int, value: RationalLike) -> "Polynomial":
        return cls(nvars, {(0,) * nvars: value})

    @classmethod
    def variable(cls, nvars: int, index: int) -> "Polynomial":
        if not 0 <= index < nvars:
            raise PolynomialError(f"variable index {index} out of range")
        e = [0] * nvars
        e[index] = 1
        return cls(nvars, {tuple(e): 1})

    @classmethod
    def monomial(cls, exponents: Sequence[int], coeff: RationalLike = 1) -> "Polynomial":
        return cls(len(exponents), {tuple(exponents): coeff})

    # -- accessors ---------------------------------------------------------

    @property
    def nvars(self) -> int:
        return self._nvars

    @property
    def terms(self) -> Mapping[Monomial, Fraction]:
        return MappingProxyType(self._terms)

    def coeff(self, mono: Sequence[int]) -> Fraction:
        return self._terms.get(tuple(mono), Fraction(0))

    def monomials(self) -> list[Monomial]:
        """Support in graded-lex order (ascending degree)."""
        return sorted(self._terms, key=basis_key)

    def is_zero(self) -> bool:
        return not self._terms

    @property
    def degree(self) -> int | None:
        """Total degree; ``None`` for the zero polynomial (degree undefined)."""
        if not self._terms:
            return None
        return max(sum(m) for m in self._terms)

    def min_degree(self) -> int | None:
        if not self._terms:
            return None
        return min(sum(m) for m in self._terms)

    def is_form(self) -> bool:
        """True for nonzero homogeneous polynomials."""
        return bool(self._terms) and self.degree == self.min_degree()

    def is_even(self) -> bool:
        return all(e % 2 == 0 for m in self._terms for e in m)

    def __len__(self) -> int:
        return len(self._terms)

    def __iter__(self):
        return iter(self._terms.items())

    # -- arithmetic --------------------------------------------------------

    def _check(self, other: "Polynomial") -> None:
        if other._nvars != self._nvars:
            raise PolynomialError(
                f"variable count mismatch: {self._nvars} vs {other._nvars}"
            )

    def _coerce(self, other) -> "Polynomial":
        if isinstance(other, Polynomial):
            self._check(other)
            return other
        if isinstance(other, (int, Fraction)) and not isinstance(other, bool):
            return Polynomial.constant(self._nvars, other)
        return NotImplemented

    def __add__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        out = dict(self._terms)
        for m, c in other._terms.items():
            out[m] = out.get(m, 0) + c
        return Polynomial(self._nvars, out)

    __radd__ = __add__

    def __neg__(self):
        return Polynomial(self._nvars, {m: -c for m, c in self._terms.items()})

    def __sub__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        return self + (-other)

    def __rsub__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        return other - self

    def __mul__(self, other):
        if isinstance(other, (int, Fraction)) and not isinstance(other, bool):
            return self.scale(other)
        if not isinstance(other, Polynomial):
            return NotImplemented
        self._check(other)
        out: dict[Monomial, Fraction] = {}
        for ma, ca in self._terms.items():
            for mb, cb in other._terms.items():
                m = monomial_mul(ma, mb)
                out[m] = out.get(m, 0) + ca * cb
        return Polynomial(self._nvars, out)

    def __rmul__(self, other):
        return self.__mul__(other)

    def __pow__(self, k: int):
        if not isinstance(k, int) or k < 0:
            raise PolynomialError("power must be a nonnegative integer")
        result = Polynomial.constant(self._nvars, 1)
        base = self
        while k:
            if k & 1:
                result = result * base
            base = base * base
            k >>= 1
        return result

    def scale(self, factor: RationalLike) -> "Polynomial":
        f = to_rational(factor)
        return Polynomial(self._nvars, {m: c * f for m, c in self._terms.items()})

    def __eq__(self, other) -> bool:
        if isinstance(other, Polynomial):
            return self._nvars == other._nvars and self._terms == other._terms
        if isinstance(other, (int, Fraction)) and not isinstance(other, bool):
            return self == Polynomial.constant(self._nvars, other)
        return NotImplemented

    def __hash__(self) -> int:
        if self._hash is None:
            self._hash = hash((self._nvars, frozenset(self._terms.items())))
        return self._hash

    # -- calculus and transforms -------------------------------------------

    def diff(self, var: int) -> "Polynomial":
        return differentiate(self, var)

    def __call__(self, *point) -> Fraction:
        if len(point) == 1 and isinstance(point[0], (list, tuple)):
            point = point[0]
        return evaluate(self, point)

    def to_text(self, names: Sequence[str] | None = None) -> str:
        return format_polynomial(self, names)

    def __repr__(self) -> str:
        return f"Polynomial({self._nvars}, {format_polynomial(self)!r})"

    __str__ = to_text


def poly_arith(a: Polynomial, b, kind: str) -> Polynomial:
    """Dispatch form of the ring operations: ``kind`` in add, sub, mul, scale."""
    if kind == "add":
        return a + b
    if kind == "sub":
        return a - b
    if kind == "mul":
        return a * b
    if kind == "scale":
        return a.scale(b)
    raise ValueError(f"unknown operation {kind!r}")


def differentiate(p: Polynomial, var: int) -> Polynomial:
    if not 0 <= var < p.nvars:
        raise PolynomialError(f"variable index {var} out of range for {p.nvars} variables")
    out = {}
    for m, c in p.terms.items():
        e = m[var]
        if e:
            nm = list(m)
            nm[var] = e - 1
            out[tuple(nm)] = c * e
    return Polynomial(p.nvars, out)


def exact_divide(a: Polynomial, b: Polynomial) -> Polynomial:
    """Quotient ``a / b``; raises if ``b`` does not divide ``a`` exactly."""
    if b.is_zero():
        raise ZeroDivisionError("division by the zero polynomial")
    lead_b = max(b.terms)
    cb = b.terms[lead_b]
    quot: dict[Monomial, Fraction] = {}
    rem = a
    while not rem.is_zero():
        lead = max(rem.terms)
        if any(x < y for x, y in zip(lead, lead_b)):
            raise PolynomialError("division is not exact")
        mono = tuple(x - y for x, y in zip(lead, lead_b))
        c = rem.terms[lead] / cb
        quot[mono] = c
        rem = rem - b * Polynomial(a.nvars, {mono: c})
    return Polynomial(a.nvars, quot)


def evaluate(p: Polynomial, point: Sequence[RationalLike]) -> Fraction:
    if len(point) != p.nvars:
        raise PolynomialError(f"point has {len(point)} coordinates, expected {p.nvars}")
    pt = [to_rational(v) for v in point]
    total = Fraction(0)
    for m, c in p.terms.items():
        term = c
        for v, e in zip(pt, m):
            if e:
                term *= v**e
        total += term
    return total


def evaluate_float(p: Polynomial, point: Sequence[float]) -> float:
    total = 0.0
    for m, c in p.terms.items():
        term = float(c)
        for v, e in zip(point, m):
            if e:
                term *= v**e
        total += term
    return total


def homogenize(p: Polynomial) -> Polynomial:
    """Append a variable y and return ``y**d * p(x / y)`` with ``d = deg p``."""
    if p.is_zero():
        raise PolynomialError("cannot homogenize the zero polynomial")
    d = p.degree
    return Polynomial(p.nvars + 1, {m + (d - sum(m),): c for m, c in p.terms.items()})


def dehomogenize(p: Polynomial, var: int, value: RationalLike = 1) -> Polynomial:
    """Substitute ``value`` for variable ``var`` and drop it from the ambient space."""
    if not 0 <= var < p.nvars:
        raise PolynomialError(f"variable index {var} out of range for {p.nvars} variables")
    if p.nvars == 1:
        raise PolynomialError("cannot drop the only variable")
    v = to_rational(value)
    out: dict[Monomial, Fraction] = {}
    for m, c in p.terms.items():
        nm = m[:var] + m[var + 1:]
        out[nm] = out.get(nm, 0) + c * v ** m[var]
    return Polynomial(p.nvars - 1, out)


def substitute_scaling(p: Polynomial, scales: Sequence[RationalLike]) -> Polynomial:
    """Return ``p(s_1 x_1, ..., s_n x_n)``."""
    s = [to_rational(v) for v in scales]
    out = {}
    for m, c in p.terms.items():
        f = c
        for si, e in zip(s, m):
            f *= si**e
        out[m] = f
    return Polynomial(p.nvars, out)


def embed(p: Polynomial, nvars: int, offset: int = 0) -> Polynomial:
    """View ``p`` as a polynomial in ``nvars`` variables, its own starting at ``offset``."""
    if offset + p.nvars > nvars:
        raise PolynomialError("embedding does not fit")
    pre = (0,) * offset
    post = (0,) * (nvars - offset - p.nvars)
    return Polynomial(nvars, {pre + m + post: c for m, c in p.terms.items()})


def sum_of_squares_multiplier(nvars: int, r: int, count: int | None = None,
                              constant: int = 0) -> Polynomial:
    """``(constant + x_1^2 + ... + x_count^2)^r`` in ``nvars`` variables."""
    count = nvars if count is None else count
    base = Polynomial.constant(nvars, constant)
    for i in range(count):
        e = [0] * nvars
        e[i] = 2
        base = base + Polynomial.monomial(e)
    return base**r


def all_monomials(nvars: int, degree: int) -> list[Monomial]:
    """Exponent tuples of total degree exactly ``degree``, in graded-lex order."""
    if degree < 0:
        return []
    if nvars == 1:
        return [(degree,)]
    out = []
    for first in range(degree, -1, -1):
        for rest in all_monomials(nvars - 1, degree - first):
            out.append((first,) + rest)
    return out


# -- polynomial matrices -----------------------------------------------------


class PolyMatrix:
    """Symmetric (or, for Cauchy-Binet inputs, rectangular) matrix of polynomials."""

    __slots__ = ("_rows", "_nvars")

    def __init__(self, rows: Sequence[Sequence[Polynomial]], symmetric: bool = True):
        rows = tuple(tuple(r) for r in rows)
        if not rows or not rows[0]:
            raise PolynomialError("empty polynomial matrix")
        width = len(rows[0])
        nvars = rows[0][0].nvars
        for r in rows:
            if len(r) != width:
                raise PolynomialError("ragged polynomial matrix")
            for e in r:
                if e.nvars != nvars:
                    raise PolynomialError("entries must share nvars")
        if symmetric:
            if len(rows) != width:
                raise PolynomialError("symmetric matrix must be square")
            for i in range(width):
                for j in range(i + 1, width):
                    if rows[i][j] != rows[j][i]:
                        raise PolynomialError(f"matrix not symmetric at ({i}, {j})")
        self._rows = rows
        self._nvars = nvars

    @property
    def nvars(self) -> int:
        return self._nvars

    @property
    def shape(self) -> tuple[int, int]:
        return len(self._rows), len(self._rows[0])

    @property
    def dim(self) -> int:
        return len(self._rows)

    def __getitem__(self, ij: tuple[int, int]) -> Polynomial:
        i, j = ij
        return self._rows[i][j]

    def rows(self) -> tuple[tuple[Polynomial, ...], ...]:
        return self._rows

    def is_symmetric(self) -> bool:
        n, m = self.shape
        return n == m and all(
            self._rows[i][j] == self._rows[j][i] for i in range(n) for j in range(i + 1, n)
        )

    def submatrix(self, rows: Sequence[int], cols: Sequence[int] | None = None) -> "PolyMatrix":
        cols = rows if cols is None else cols
        sym = cols is rows or list(cols) == list(rows)
        return PolyMatrix([[self._rows[i][j] for j in cols] for i in rows], symmetric=sym and self.is_symmetric())

    def transpose(self) -> "PolyMatrix":
        n, m = self.shape
        return PolyMatrix([[self._rows[i][j] for i in range(n)] for j in range(m)], symmetric=False)

    def matmul(self, other: "PolyMatrix", symmetric: bool = False) -> "PolyMatrix":
        n, k = self.shape
        k2, m = other.shape
        if k != k2:
            raise PolynomialError("inner dimensions differ")
        out = []
        for i in range(n):
            row = []
            for j in range(m):
                acc = Polynomial.zero(self._nvars)
                for t in range(k):
                    acc = acc + self._rows[i][t] * other._rows[t][j]
                row.append(acc)
            out.append(row)
        return PolyMatrix(out, symmetric=symmetric)

    def scale(self, factor: RationalLike | Polynomial) -> "PolyMatrix":
        return PolyMatrix([[e * factor for e in r] for r in self._rows], symmetric=self.is_symmetric())

    def __eq__(self, other) -> bool:
        return isinstance(other, PolyMatrix) and self._rows == other._rows

    def __hash__(self) -> int:
        return hash(self._rows)

    def __repr__(self) -> str:
        body = "; ".join(", ".join(format_polynomial(e) for e in r) for r in self._rows)
        return f"PolyMatrix([{body}])"


def hessian(p: Polynomial) -> PolyMatrix:
    n = p.nvars
    first = [differentiate(p, i) for i in range(n)]
    rows = [[None] * n for _ in range(n)]
    for i in range(n):
        for j in range(i, n):
            h = differentiate(first[i], j)
            rows[i][j] = rows[j][i] = h
    return PolyMatrix(rows)


def quadratic_form_in_y(P: PolyMatrix, yvar_offset: int | None = None) -> Polynomial:
    """Return ``y^T P(x) y`` in the joint variables ``[x; y]``.

    The y block starts at ``yvar_offset`` (default: right after the x variables).
    """
    m = P.dim
    n = P.nvars
    offset = n if yvar_offset is None else yvar_offset
    if offset < n:
        raise PolynomialError("y block would overlap the x variables")
    total = offset + m
    out: dict[Monomial, Fraction] = {}
    for i in range(m):
        for j in range(m):
            for mono, c in P[i, j].terms.items():
                e = list(mono) + [0] * (total - n)
                e[offset + i] += 1
                e[offset + j] += 1
                key = tuple(e)
                out[key] = out.get(key, 0) + c
    return Polynomial(total, out)


# -- text and document formats -----------------------------------------------

_TOKEN = re.compile(
    r"\s*(?:(?P<num>\d+(?:\.\d+)?(?:/\d+)?)|(?P<name>[A-Za-z_][A-Za-z_0-9]*)|(?P<op>[-+*^()]))"
)


def _tokenize(text: str):
    pos = 0
    tokens = []
    while pos < len(text):
        if text[pos:].strip() == "":
            break
        m = _TOKEN.match(text, pos)
        if not m or m.end() == pos:
            raise ParseError(f"unexpected character {text[pos]!r}", pos)
        start = m.start(m.lastgroup)
        tokens.append((m.lastgroup, m.group(m.lastgroup), start))
        pos = m.end()
    tokens.append(("end", "", len(text)))
    return tokens


def parse_polynomial(text: str, var_names: Sequence[str] | None = None) -> Polynomial:
    """Parse a signed sum of ``coeff*x1^a*x2^b`` terms.

    Coefficients are integers, ``a/b`` rationals or finite decimals. With no
    ``var_names`` the names ``x1, x2, ...`` are accepted and the variable count
    is the largest index seen.
    """
    tokens = _tokenize(text)
    if var_names is None:
        idx = [int(t[1][1:]) for t in tokens if t[0] == "name" and re.fullmatch(r"x\d+", t[1])]
        bad = [t for t in tokens if t[0] == "name" and not re.fullmatch(r"x[1-9]\d*", t[1])]
        if bad:
            raise ParseError(f"unknown variable {bad[0][1]!r}", bad[0][2])
        var_names = default_names(max(idx) if idx else 1)
    index = {name: i for i, name in enumerate(var_names)}
    n = len(var_names)
    out: dict[Monomial, Fraction] = {}
    k = 0

    def peek():
        return tokens[k]

    def take():
        nonlocal k
        t = tokens[k]
        k += 1
        return t

    if peek()[0] == "end":
        raise ParseError("empty expression", 0)
    first = True
    while True:
        sign = 1
        t = peek()
        if t[0] == "op" and t[1] in "+-":
            take()
            sign = -1 if t[1] == "-" else 1
        elif not first:
            raise ParseError(f"expected '+' or '-', found {t[1]!r}", t[2])
        first = False
        coeff = Fraction(sign)
        expo = [0] * n
        need_factor = True
        while need_factor:
            t = take()
            if t[0] == "num":
                coeff *= Fraction(t[1])
            elif t[0] == "name":
                if t[1] not in index:
                    raise ParseError(f"unknown variable {t[1]!r}", t[2])
                power = 1
                if peek()[1] == "^" and peek()[0] == "op":
                    take()
                    pt = take()
                    if pt[0] != "num" or not pt[1].isdigit():
                        raise ParseError("exponent must be a nonnegative integer", pt[2])
                    power = int(pt[1])
                expo[index[t[1]]] += power
            else:
                raise ParseError(f"expected a coefficient or variable, found {t[1]!r}", t[2])
            if peek()[0] == "op" and peek()[1] == "*":
                take()
            else:
                need_factor = False
        key = tuple(expo)
        out[key] = out.get(key, 0) + coeff
        if peek()[0] == "end":
            break
    return Polynomial(n, out)


def _format_coeff(c: Fraction) -> str:
    return str(c.numerator) if c.denominator == 1 else f"{c.numerator}/{c.denominator}"


def format_polynomial(p: Polynomial, names: Sequence[str] | None = None) -> str:
    """Canonical text: highest degree first, graded lex, ``*`` and ``^`` syntax."""
    names = default_names(p.nvars) if names is None else list(names)
    if p.is_zero():
        return "0"
    parts = []
    for mono in sorted(p.terms, key=print_key):
        c = p.terms[mono]
        factors = [names[i] if e == 1 else f"{names[i]}^{e}" for i, e in enumerate(mono) if e]
        mag = abs(c)
        if not factors:
            body = _format_coeff(mag)
        elif mag == 1:
            body = "*".join(factors)
        else:
            body = _format_coeff(mag) + "*" + "*".join(factors)
        if not parts:
            parts.append(body if c > 0 else "-" + body)
        else:
            parts.append(("+ " if c > 0 else "- ") + body)
    return " ".join(parts)


def polynomial_to_dict(p: Polynomial) -> dict:
    return {
        "nvars": p.nvars,
        "terms": [
            {"exponents": list(m), "coeff": _format_coeff(p.terms[m])}
            for m in sorted(p.terms, key=print_key)
        ],
    }


def polynomial_from_dict(doc: Mapping) -> Polynomial:
    try:
        nvars = int(doc["nvars"])
        terms = [(tuple(t["exponents"]), Fraction(str(t["coeff"]))) for t in doc["terms"]]
    except (KeyError, TypeError, ValueError) as exc:
        raise PolynomialError(f"malformed polynomial document: {exc}") from exc
    return Polynomial(nvars, terms)


def random_polynomial(rng, nvars: int, degree: int, nterms: int, homogeneous: bool = False,
                      coeff_range: int = 5) -> Polynomial:
    """Random integer-coefficient polynomial (test and experiment helper)."""
    if homogeneous:
        pool = all_monomials(nvars, degree)
    else:
        pool = [m for d in range(degree + 1) for m in all_monomials(nvars, d)]
    picks = rng.choice(len(pool), size=min(nterms, len(pool)), replace=False)
    terms = {}
    for i in picks:
        c = int(rng.integers(-coeff_range, coeff_range + 1))
        terms[pool[int(i)]] = c if c else 1
    return Polynomial(nvars, terms)

