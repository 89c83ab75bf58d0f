"""Exact rational and prime-field arithmetic with dense linear algebra.

Matrices are plain sequences of rows.  Every routine takes an optional
``modulus``: ``None`` means the rationals (entries become ``Fraction``),
a prime ``p`` means GF(p) (entries become ints in ``[0, p)``).
"""

from __future__ import annotations

import decimal
import math
from fractions import Fraction
from typing import Sequence

Rational = Fraction

__all__ = [
    "Rational",
    "ParameterError",
    "RankDeficiencyError",
    "PrimeField",
    "as_rational",
    "binom",
    "is_prime",
    "next_prime",
    "primitive_root",
    "rank",
    "solve",
    "inverse",
    "matmul",
    "matvec",
    "identity",
    "fmt_rational",
]


class ParameterError(ValueError):
    """Raised for out-of-range or malformed parameters."""


class RankDeficiencyError(ArithmeticError):
    """Raised when a square system is singular."""

    def __init__(self, rank: int, size: int):
        super().__init__(f"matrix is rank deficient: rank {rank} < {size}")
        self.rank = rank
        self.size = size


def as_rational(value) -> Fraction:
    """Parse ints, Fractions and strings such as ``"7/17"`` or ``"0.5"``."""
    if isinstance(value, Fraction):
        return value
    if isinstance(value, int):
        return Fraction(value)
    if isinstance(value, str):
        try:
            return Fraction(value.strip())
        except ValueError as exc:
            raise ParameterError(f"not a rational number: {value!r}") from exc
    if isinstance(value, float):
        return Fraction(value).limit_denominator(10**9)
    raise ParameterError(f"cannot interpret {value!r} as a rational")


def fmt_rational(q: Fraction) -> str:
    return str(q.numerator) if q.denominator == 1 else f"{q.numerator}/{q.denominator}"


def fmt_decimal(q: Fraction, digits: int = 10) -> str:
    """Decimal rendering with ``digits`` significant digits."""
    with decimal.localcontext() as ctx:
        ctx.prec = digits
        v = decimal.Decimal(q.numerator) / decimal.Decimal(q.denominator)
    return f"{v.normalize():f}" if v else "0"


def binom(n: int, k: int) -> int:
    if n < 0 or k < 0 or k > n:
        raise ParameterError(f"binom({n}, {k}) out of range")
    return math.comb(n, k)


def is_prime(n: int) -> bool:
    if n < 2:
        return False
    if n % 2 == 0:
        return n == 2
    i = 3
    while i * i <= n:
        if n % i == 0:
            return False
        i += 2
    return True


def next_prime(n: int) -> int:
    """Smallest prime >= n."""
    n = max(n, 2)
    while not is_prime(n):
        n += 1
    return n


def _prime_factors(n: int) -> list[int]:
    out, d = [], 2
    while d * d <= n:
        if n % d == 0:
            out.append(d)
            while n % d == 0:
                n //= d
        d += 1
    if n > 1:
        out.append(n)
    return out


def primitive_root(p: int) -> int:
    if not is_prime(p):
        raise ParameterError(f"{p} is not prime")
    if p == 2:
        return 1
    factors = _prime_factors(p - 1)
    for g in range(2, p):
        if all(pow(g, (p - 1) // q, p) != 1 for q in factors):
            return g
    raise AssertionError("unreachable")


class PrimeField:
    """Arithmetic in GF(p) on plain ints."""

    def __init__(self, p: int):
        if not is_prime(p):
            raise ParameterError(f"field size {p} is not prime")
        self.p = p

    def __repr__(self):
        return f"GF({self.p})"

    def __eq__(self, other):
        return isinstance(other, PrimeField) and other.p == self.p

    def __hash__(self):
        return hash(("GF", self.p))

    def elem(self, x) -> int:
        """Map an int or a rational with invertible denominator into the field."""
        if isinstance(x, Fraction):
            if x.denominator % self.p == 0:
                raise ParameterError(f"{x} has no image in {self}")
            return x.numerator * pow(x.denominator, -1, self.p) % self.p
        return int(x) % self.p

    def add(self, x: int, y: int) -> int:
        return (x + y) % self.p

    def sub(self, x: int, y: int) -> int:
        return (x - y) % self.p

    def mul(self, x: int, y: int) -> int:
        return x * y % self.p

    def inv(self, x: int) -> int:
        if x % self.p == 0:
            raise ZeroDivisionError(f"0 has no inverse in {self}")
        return pow(x, -1, self.p)

    def div(self, x: int, y: int) -> int:
        return x * self.inv(y) % self.p

    def dot(self, xs: Sequence[int], ys: Sequence[int]) -> int:
        return sum(a * b for a, b in zip(xs, ys)) % self.p


def _normalise(rows, modulus):
    if modulus is None:
        return [[as_rational(v) for v in row] for row in rows]
    return [[int(v % modulus) if not isinstance(v, Fraction) else PrimeField(modulus).elem(v)
             for v in row] for row in rows]


def _eliminate(m: list[list], modulus, ncols: int):
    """Gauss-Jordan in place on the first ``ncols`` columns; returns pivot columns."""
    pivots = []
    row = 0
    nrows = len(m)
    for col in range(ncols):
        if row == nrows:
            break
        piv = next((i for i in range(row, nrows) if m[i][col] != 0), None)
        if piv is None:
            continue
        m[row], m[piv] = m[piv], m[row]
        lead = m[row][col]
        if modulus is None:
            m[row] = [v / lead for v in m[row]]
        else:
            li = pow(lead, -1, modulus)
            m[row] = [v * li % modulus for v in m[row]]
        prow = m[row]
        for i in range(nrows):
            if i != row and m[i][col] != 0:
                f = m[i][col]
                if modulus is None:
                    m[i] = [a - f * b for a, b in zip(m[i], prow)]
                else:
                    m[i] = [(a - f * b) % modulus for a, b in zip(m[i], prow)]
        pivots.append(col)
        row += 1
    return pivots


def rank(rows: Sequence[Sequence], modulus: int | None = None) -> int:
    m = _normalise(rows, modulus)
    if not m:
        return 0
    return len(_eliminate(m, modulus, len(m[0])))


def solve(rows: Sequence[Sequence], rhs: Sequence, modulus: int | None = None) -> list:
    """Unique solution of a square full-rank system."""
    n = len(rows)
    if any(len(r) != n for r in rows) or len(rhs) != n:
        raise ParameterError("solve needs a square system with matching right-hand side")
    m = _normalise([list(r) + [b] for r, b in zip(rows, rhs)], modulus)
    pivots = _eliminate(m, modulus, n)
    if len(pivots) < n:
        raise RankDeficiencyError(len(pivots), n)
    return [m[i][n] for i in range(n)]


def inverse(rows: Sequence[Sequence], modulus: int | None = None) -> list[list]:
    n = len(rows)
    one = 1 if modulus is not None else Fraction(1)
    aug = [list(r) + [one if i == j else 0 * one for j in range(n)] for i, r in enumerate(rows)]
    m = _normalise(aug, modulus)
    pivots = _eliminate(m, modulus, n)
    if len(pivots) < n:
        raise RankDeficiencyError(len(pivots), n)
    return [row[n:] for row in m]


def matmul(a: Sequence[Sequence], b: Sequence[Sequence], modulus: int | None = None) -> list[list]:
    cols = list(zip(*b))
    out = [[sum(x * y for x, y in zip(row, col)) for col in cols] for row in a]
    if modulus is not None:
        out = [[v % modulus for v in row] for row in out]
    return out


def matvec(a: Sequence[Sequence], v: Sequence, modulus: int | None = None) -> list:
    out = [sum(x * y for x, y in zip(row, v)) for row in a]
    if modulus is not None:
        out = [x % modulus for x in out]
    return out


def identity(n: int) -> list[list[int]]:
    return [[int(i == j) for j in range(n)] for i in range(n)]
