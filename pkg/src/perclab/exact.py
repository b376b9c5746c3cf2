"""Exact arithmetic helpers.

Modular ratios are rationals, but the square-root biased walk needs
``sqrt(m(x) m(y))``.  For every bundled family those values live in a single
real quadratic field Q(sqrt(D)), so a tiny two-coordinate number type keeps
every kernel identity exact without pulling in a CAS.
"""

from __future__ import annotations

from fractions import Fraction
from functools import total_ordering
from numbers import Rational

__all__ = [
    "Surd",
    "as_fraction",
    "exact_abs",
    "fraction_str",
    "solve_linear",
    "sqrt_rational",
    "squarefree_split",
    "to_json_number",
]


def as_fraction(x) -> Fraction:
    if isinstance(x, Fraction):
        return x
    if isinstance(x, (int, Rational)):
        return Fraction(x)
    raise TypeError(f"not an exact rational: {x!r}")


def squarefree_split(n: int) -> tuple[int, int]:
    """Write n = s**2 * d with d squarefree; returns (s, d)."""
    if n <= 0:
        raise ValueError("squarefree_split needs a positive integer")
    s, d, f = 1, 1, 2
    while f * f <= n:
        while n % (f * f) == 0:
            n //= f * f
            s *= f
        if n % f == 0:
            n //= f
            d *= f
        f += 1
    return s, d * n


@total_ordering
class Surd:
    """The number ``a + b*sqrt(D)`` with rational a, b and squarefree D >= 1."""

    __slots__ = ("a", "b", "D")

    def __init__(self, a=0, b=0, D: int = 1):
        a = as_fraction(a)
        b = as_fraction(b)
        if D == 1:
            a, b = a + b, Fraction(0)
        elif b == 0:
            D = 1
        self.a = a
        self.b = b
        self.D = D

    # -- coercion ---------------------------------------------------------
    @staticmethod
    def lift(x) -> "Surd":
        return x if isinstance(x, Surd) else Surd(as_fraction(x))

    def _field(self, other: "Surd") -> int:
        if self.D == 1:
            return other.D
        if other.D in (1, self.D):
            return self.D
        raise ValueError(f"mixing Q(sqrt({self.D})) with Q(sqrt({other.D}))")

    @property
    def is_rational(self) -> bool:
        return self.b == 0

    def rational(self) -> Fraction:
        if self.b:
            raise ValueError(f"{self} is irrational")
        return self.a

    # -- arithmetic -------------------------------------------------------
    def __add__(self, other):
        o = Surd.lift(other)
        return Surd(self.a + o.a, self.b + o.b, self._field(o))

    __radd__ = __add__

    def __neg__(self):
        return Surd(-self.a, -self.b, self.D)

    def __sub__(self, other):
        return self + (-Surd.lift(other))

    def __rsub__(self, other):
        return Surd.lift(other) - self

    def __mul__(self, other):
        o = Surd.lift(other)
        D = self._field(o)
        return Surd(self.a * o.a + self.b * o.b * D, self.a * o.b + self.b * o.a, D)

    __rmul__ = __mul__

    def conjugate(self):
        return Surd(self.a, -self.b, self.D)

    def norm(self) -> Fraction:
        return self.a * self.a - self.b * self.b * self.D

    def __truediv__(self, other):
        o = Surd.lift(other)
        n = o.norm()
        if n == 0:
            raise ZeroDivisionError("division by zero surd")
        num = self * o.conjugate()
        return Surd(num.a / n, num.b / n, num.D)

    def __rtruediv__(self, other):
        return Surd.lift(other) / self

    # -- order ------------------------------------------------------------
    def sign(self) -> int:
        sa = (self.a > 0) - (self.a < 0)
        sb = (self.b > 0) - (self.b < 0)
        if sb == 0 or sa == sb:
            return sa or sb
        if sa == 0:
            return sb
        # opposite signs: compare a^2 with b^2 D
        diff = self.a * self.a - self.b * self.b * self.D
        return sa if diff > 0 else (sb if diff < 0 else 0)

    def __abs__(self):
        return -self if self.sign() < 0 else self

    def __eq__(self, other):
        if not isinstance(other, (Surd, int, Rational)):
            return NotImplemented
        o = Surd.lift(other)
        return self.a == o.a and self.b == o.b and (self.b == 0 or self.D == o.D)

    def __lt__(self, other):
        return (self - Surd.lift(other)).sign() < 0

    def __hash__(self):
        return hash(self.a) if self.b == 0 else hash((self.a, self.b, self.D))

    def __bool__(self):
        return bool(self.a) or bool(self.b)

    def __float__(self):
        return float(self.a) + float(self.b) * self.D ** 0.5

    def __repr__(self):
        if self.b == 0:
            return f"Surd({self.a})"
        return f"Surd({self.a} + {self.b}*sqrt({self.D}))"

    def __str__(self):
        if self.b == 0:
            return str(self.a)
        sign = "-" if self.b < 0 else "+"
        head = "" if self.a == 0 else f"{self.a}{sign}"
        if not head and sign == "-":
            head = "-"
        return f"{head}{abs(self.b)}*sqrt({self.D})"


def sqrt_rational(r) -> Surd:
    """Exact square root of a nonnegative rational as a Surd."""
    r = as_fraction(r)
    if r < 0:
        raise ValueError("square root of a negative rational")
    if r == 0:
        return Surd(0)
    s, d = squarefree_split(r.numerator * r.denominator)
    return Surd(0, Fraction(s, r.denominator), d)


def exact_abs(x):
    return abs(x)


def fraction_str(x) -> str:
    if isinstance(x, Surd):
        return str(x)
    x = as_fraction(x)
    return f"{x.numerator}/{x.denominator}"


def to_json_number(x) -> dict:
    """Serialize an exact value as ``{"exact": "num/den", "float": ...}``."""
    return {"exact": fraction_str(x), "float": float(x)}


def solve_linear(rows, rhs):
    """Solve ``rows @ x = rhs`` exactly over the rationals.

    Accepts consistent overdetermined systems; raises ``ValueError`` when the
    system is inconsistent or the solution is not unique.
    """
    m = [[as_fraction(v) for v in row] + [as_fraction(b)] for row, b in zip(rows, rhs)]
    if not m:
        return []
    ncols = len(m[0]) - 1
    pivots = []
    r = 0
    for c in range(ncols):
        piv = next((i for i in range(r, len(m)) if m[i][c] != 0), None)
        if piv is None:
            continue
        m[r], m[piv] = m[piv], m[r]
        inv = 1 / m[r][c]
        m[r] = [v * inv for v in m[r]]
        for i in range(len(m)):
            if i != r and m[i][c] != 0:
                f = m[i][c]
                m[i] = [vi - f * vr for vi, vr in zip(m[i], m[r])]
        pivots.append(c)
        r += 1
    if any(row[-1] != 0 for row in m[r:]):
        raise ValueError("inconsistent linear system")
    if len(pivots) < ncols:
        raise ValueError("linear system has no unique solution")
    x = [Fraction(0)] * ncols
    for i, c in enumerate(pivots):
        x[c] = m[i][-1]
    return x
