"""Per-type interval grids over [1/(1+lambda), 1]."""
from dataclasses import dataclass
from fractions import Fraction
from math import lcm

import numpy as np

from ..errors import InvalidParameterError
from ..exact import format_rational, parse_activity, parse_rational


@dataclass(frozen=True)
class IntervalGrid:
    """Breakpoints ``X_0 < ... < X_d`` per type; interval ``k`` is ``[X_k, X_{k+1}]``.

    Every type's first point is exactly ``1/(1+lambda)`` and its last is 1.
    """

    lam: Fraction
    points: tuple  # one tuple of Fractions per type

    def __post_init__(self):
        lam = parse_activity(self.lam)
        lo = 1 / (1 + lam)
        pts = tuple(tuple(Fraction(x) for x in p) for p in self.points)
        for i, p in enumerate(pts):
            if len(p) < 2:
                raise InvalidParameterError(f"type {i}: a grid needs at least one interval")
            if p[0] != lo or p[-1] != 1:
                raise InvalidParameterError(f"type {i}: grid must run from 1/(1+lambda) to 1")
            if any(a >= b for a, b in zip(p, p[1:])):
                raise InvalidParameterError(f"type {i}: breakpoints must increase strictly")
        object.__setattr__(self, "lam", lam)
        object.__setattr__(self, "points", pts)

    @property
    def t(self):
        return len(self.points)

    def sizes(self):
        return [len(p) - 1 for p in self.points]

    def floats(self, i):
        return np.array([float(x) for x in self.points[i]])

    def common_denominator(self):
        return lcm(*(x.denominator for p in self.points for x in p))

    def numerators(self, D=None):
        """Integer numerators of every breakpoint over the common denominator ``D``."""
        D = D or self.common_denominator()
        return [[x.numerator * (D // x.denominator) for x in p] for p in self.points], D

    def width(self, i, k):
        p = self.points[i]
        return p[k + 1] - p[k]

    def split(self, marks, min_width=Fraction(0)):
        """Halve each interval ``(i, k)`` in ``marks`` whose width is at least ``2*min_width``."""
        by_type = {}
        for i, k in marks:
            by_type.setdefault(i, set()).add(k)
        new = []
        parents = []
        for i, p in enumerate(self.points):
            ks = by_type.get(i, ())
            out = [p[0]]
            par = []
            for k in range(len(p) - 1):
                if k in ks and (p[k + 1] - p[k]) >= 2 * min_width:
                    out.append((p[k] + p[k + 1]) / 2)
                    par.append(k)
                out.append(p[k + 1])
                par.append(k)
            new.append(tuple(out))
            parents.append(tuple(par))
        return IntervalGrid(self.lam, tuple(new)), parents

    def to_dict(self):
        return {"lambda": format_rational(self.lam),
                "points": [[format_rational(x) for x in p] for p in self.points]}

    @classmethod
    def from_dict(cls, d):
        return cls(parse_activity(d["lambda"]),
                   tuple(tuple(parse_rational(x) for x in p) for p in d["points"]))


def uniform_points(lam, d):
    lam = parse_activity(lam)
    if not isinstance(d, int) or d < 1:
        raise InvalidParameterError("d must be a positive integer")
    base = 1 / (1 + lam)
    step = lam / (d * (1 + lam))
    return tuple(base + k * step for k in range(d + 1))


def make_grid(lam, d, types=1):
    """Uniform grid of ``d`` intervals per type: ``X_k = 1/(1+lam) + k*lam/(d*(1+lam))``."""
    pts = uniform_points(lam, d)
    return IntervalGrid(parse_activity(lam), (pts,) * types)


def grid_for_matrix(M, lam, d):
    return make_grid(lam, d, M.core.t)
