"""Exact arithmetic in a real quadratic field Q(sqrt(D)) for rational D > 0."""
from dataclasses import dataclass
from fractions import Fraction
from math import isqrt

from .errors import InvalidParameterError
from .exact import format_rational


def rational_sqrt(q):
    """Exact square root of a non-negative Fraction, or None if irrational."""
    q = Fraction(q)
    if q < 0:
        return None
    n, d = q.numerator, q.denominator
    rn, rd = isqrt(n), isqrt(d)
    if rn * rn == n and rd * rd == d:
        return Fraction(rn, rd)
    return None


@dataclass(frozen=True)
class Surd:
    """The number ``a + b*sqrt(radicand)`` with rational ``a``, ``b``."""

    a: Fraction
    b: Fraction
    radicand: Fraction

    def __post_init__(self):
        a, b, r = Fraction(self.a), Fraction(self.b), Fraction(self.radicand)
        if r <= 0:
            raise InvalidParameterError("radicand must be positive")
        root = rational_sqrt(r)
        if root is not None and b:
            a, b = a + b * root, Fraction(0)
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "b", b)
        object.__setattr__(self, "radicand", r)

    @classmethod
    def sqrt(cls, radicand):
        return cls(Fraction(0), Fraction(1), radicand)

    def _coerce(self, other):
        if isinstance(other, Surd):
            if other.radicand != self.radicand:
                raise InvalidParameterError("surds over different fields")
            return other
        return Surd(Fraction(other), Fraction(0), self.radicand)

    def __add__(self, other):
        o = self._coerce(other)
        return Surd(self.a + o.a, self.b + o.b, self.radicand)

    __radd__ = __add__

    def __neg__(self):
        return Surd(-self.a, -self.b, self.radicand)

    def __sub__(self, other):
        return self + (-self._coerce(other))

    def __rsub__(self, other):
        return self._coerce(other) - self

    def __mul__(self, other):
        o = self._coerce(other)
        return Surd(self.a * o.a + self.b * o.b * self.radicand,
                    self.a * o.b + self.b * o.a, self.radicand)

    __rmul__ = __mul__

    def conjugate(self):
        return Surd(self.a, -self.b, self.radicand)

    def norm(self):
        return self.a * self.a - self.b * self.b * self.radicand

    def __truediv__(self, other):
        o = self._coerce(other)
        n = o.norm()
        if n == 0:
            raise ZeroDivisionError("division by zero in quadratic field")
        c = self * o.conjugate()
        return Surd(c.a / n, c.b / n, self.radicand)

    def __rtruediv__(self, other):
        return self._coerce(other) / self

    def __pow__(self, k):
        if not isinstance(k, int) or k < 0:
            raise InvalidParameterError("only non-negative integer powers")
        out = Surd(Fraction(1), Fraction(0), self.radicand)
        for _ in range(k):
            out = out * self
        return out

    def sign(self):
        """Exact sign, comparing squares when the two parts disagree in sign."""
        sa = (self.a > 0) - (self.a < 0)
        sb = (self.b > 0) - (self.b < 0)
        if sb == 0:
            return sa
        if sa == 0 or sa == sb:
            return sb
        # a and b*sqrt(r) have opposite signs: the larger magnitude wins.
        diff = self.a * self.a - self.b * self.b * self.radicand
        return sa if diff > 0 else (sb if diff < 0 else 0)

    def __eq__(self, other):
        try:
            return (self - other).sign() == 0
        except InvalidParameterError:
            return False

    def __hash__(self):
        return hash((self.a, self.b, self.radicand))

    def __lt__(self, other):
        return (self - other).sign() < 0

    def __float__(self):
        return float(self.a) + float(self.b) * float(self.radicand) ** 0.5

    def enclosure(self, digits=30):
        """Rational interval of width ``|b| * 10**-digits`` containing the value."""
        scale = 10**digits
        r = self.radicand
        # floor(sqrt(r) * scale) via integer square root of r * scale**2.
        lo_root = Fraction(isqrt(r.numerator * scale * scale // r.denominator), scale)
        hi_root = lo_root + Fraction(1, scale)
        ends = [self.a + self.b * lo_root, self.a + self.b * hi_root]
        return min(ends), max(ends)

    def to_dict(self):
        return {"rational": format_rational(self.a), "coefficient": format_rational(self.b),
                "radicand": format_rational(self.radicand)}

    def __str__(self):
        if self.b == 0:
            return str(self.a)
        return f"{self.a} + {self.b}*sqrt({self.radicand})"
