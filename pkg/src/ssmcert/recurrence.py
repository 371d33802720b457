"""The hard-core tree recurrence, exactly and with directed rounding to a decimal grid.

For a branching matrix ``M`` the recurrence over non-transient types is

    F_i(x) = 1 / (1 + lambda * prod_j x_j ** M[i, j])

where ``x_i`` is the probability that a type-``i`` root is unoccupied. Grid
values are integer numerators over ``10**scale``; rounding down and up is
done in integer arithmetic, so ``F_down(x) <= F(x) <= F_up(x)`` holds exactly.
"""
from dataclasses import dataclass
from fractions import Fraction

from .errors import InvalidParameterError, ResourceLimitError
from .exact import format_fixed, parse_activity, parse_fixed

DEFAULT_SCALE = 7


@dataclass(frozen=True)
class GridVector:
    """Per-type grid values ``numerators[i] / 10**scale``, each in ``[0, 1]``."""

    numerators: tuple
    scale: int = DEFAULT_SCALE

    def __post_init__(self):
        nums = tuple(int(n) for n in self.numerators)
        top = 10**self.scale
        for n in nums:
            if not 0 <= n <= top:
                raise InvalidParameterError(f"grid numerator {n} outside [0, 10**{self.scale}]")
        object.__setattr__(self, "numerators", nums)

    @classmethod
    def zeros(cls, t, scale=DEFAULT_SCALE):
        return cls((0,) * t, scale)

    @classmethod
    def ones(cls, t, scale=DEFAULT_SCALE):
        return cls((10**scale,) * t, scale)

    @classmethod
    def from_strings(cls, values, scale=DEFAULT_SCALE):
        return cls(tuple(parse_fixed(v, scale) for v in values), scale)

    def to_strings(self):
        return [format_fixed(n, self.scale) for n in self.numerators]

    def to_fractions(self):
        den = 10**self.scale
        return tuple(Fraction(n, den) for n in self.numerators)

    def to_floats(self):
        den = 10**self.scale
        return [n / den for n in self.numerators]

    def shifted(self, units):
        """Move every coordinate by ``units`` grid steps, clipped to [0, 1]."""
        top = 10**self.scale
        return GridVector(tuple(min(top, max(0, n + units)) for n in self.numerators), self.scale)

    def __len__(self):
        return len(self.numerators)

    def __le__(self, other):
        return all(a <= b for a, b in zip(self.numerators, other.numerators))

    def __lt__(self, other):
        return all(a < b for a, b in zip(self.numerators, other.numerators))


@dataclass(frozen=True)
class Cuboid:
    lo: GridVector
    hi: GridVector

    def __post_init__(self):
        if len(self.lo) != len(self.hi) or self.lo.scale != self.hi.scale:
            raise InvalidParameterError("cuboid corners must have the same shape and scale")
        if not self.lo <= self.hi:
            raise InvalidParameterError("cuboid lower corner must be <= upper corner")

    def contains(self, x):
        return self.lo <= x <= self.hi

    def disjoint(self, other):
        return any(h1 < l2 or h2 < l1 for l1, h1, l2, h2 in zip(
            self.lo.numerators, self.hi.numerators, other.lo.numerators, other.hi.numerators))


def _sparse_core(M):
    core = M.core
    return [core.children(i) for i in range(core.t)]


class Recurrence:
    """The recurrence of a matrix at a fixed rational activity, ready to evaluate."""

    def __init__(self, M, lam):
        self.lam = parse_activity(lam)
        self.matrix = M.core
        self.rows = _sparse_core(M)
        self.degree = [sum(c for _, c in r) for r in self.rows]

    @property
    def t(self):
        return len(self.rows)

    def exact(self, x):
        x = [Fraction(v) for v in x]
        if len(x) != self.t:
            raise InvalidParameterError(f"expected {self.t} coordinates, got {len(x)}")
        if any(not 0 <= v <= 1 for v in x):
            raise InvalidParameterError("coordinates must lie in [0, 1]")
        out = []
        for row in self.rows:
            prod = Fraction(1)
            for j, c in row:
                prod *= x[j] ** c
            out.append(1 / (1 + self.lam * prod))
        return tuple(out)

    def _grid(self, x, up):
        nums = x.numerators
        if len(nums) != self.t:
            raise InvalidParameterError(f"expected {self.t} coordinates, got {len(nums)}")
        p, q = self.lam.numerator, self.lam.denominator
        S = 10**x.scale
        out = []
        for row, deg in zip(self.rows, self.degree):
            prod = 1
            for j, c in row:
                prod *= nums[j] ** c
            qs = q * S**deg
            num = S * qs
            den = qs + p * prod
            out.append(-(-num // den) if up else num // den)
        return GridVector(tuple(out), x.scale)

    def down(self, x):
        return self._grid(x, False)

    def up(self, x):
        return self._grid(x, True)

    def float(self, x):
        lam = float(self.lam)
        out = []
        for row in self.rows:
            prod = 1.0
            for j, c in row:
                prod *= x[j] ** c
            out.append(1.0 / (1.0 + lam * prod))
        return out


def eval_F_exact(M, lam, x):
    return Recurrence(M, lam).exact(x)


def eval_F_down(M, lam, x):
    return Recurrence(M, lam).down(x)


def eval_F_up(M, lam, x):
    return Recurrence(M, lam).up(x)


def _pair_step(rec, x, first):
    if first == "up":
        return rec.down(rec.up(x))
    if first == "down":
        return rec.up(rec.down(x))
    raise InvalidParameterError(f"first must be 'up' or 'down', got {first!r}")


def iterate_alternating(M, lam, start, n, first="up"):
    """Apply ``n`` rounded pairs to ``start``.

    ``first="up"`` rounds up then down (the composition F_down o F_up),
    ``first="down"`` the reverse.
    """
    if n < 0:
        raise InvalidParameterError("n must be >= 0")
    rec = M if isinstance(M, Recurrence) else Recurrence(M, lam)
    x = start
    for _ in range(n):
        x = _pair_step(rec, x, first)
    return x


def iterate_until_stable(M, lam, start, min_pairs, first="up", max_pairs=10**6):
    """Iterate rounded pairs at least ``min_pairs`` times and until a pair changes nothing.

    Returns ``(vector, pairs_applied, stable)``. Stability is not required for
    soundness of anything built on the result, only for reproducibility.
    """
    rec = M if isinstance(M, Recurrence) else Recurrence(M, lam)
    x = iterate_alternating(rec, None, start, min_pairs, first)
    n = min_pairs
    while n < max_pairs:
        y = _pair_step(rec, x, first)
        n += 1
        if y == x:
            return x, n - 1, True
        x = y
    return x, n, False


_BOUNDARIES = ("odd", "even", "free")


def _boundary_pairs(boundary, depth, lam, t):
    """Unnormalized (unoccupied, occupied) weights for a depth-``depth`` leaf."""
    if boundary == "free":
        return [(Fraction(1), lam)] * t
    occupied = (depth % 2 == 0) == (boundary == "odd")
    return [(Fraction(0), Fraction(1)) if occupied else (Fraction(1), Fraction(0))] * t


def finite_tree_marginal(M, lam, depth, boundary="odd", exact=True, max_bits=2_000_000):
    """Root unoccupation probability per type on the depth-``depth`` truncated tree.

    The truncation level is fixed by ``boundary``: under "odd" its vertices
    are occupied when ``depth`` is even and empty when odd, "even" is the
    opposite parity, and "free" leaves them unconstrained. The computation
    runs on pairs of partition functions (empty root, occupied root), not on
    ratios, so it shares no code with :class:`Recurrence`.

    With ``exact`` the result is a tuple of Fractions; numerator sizes grow
    geometrically in ``depth`` and a :class:`ResourceLimitError` is raised
    when the estimated size exceeds ``max_bits``. Otherwise floats are used
    with per-level normalization.
    """
    lam = parse_activity(lam)
    if depth < 0:
        raise InvalidParameterError("depth must be >= 0")
    if boundary not in _BOUNDARIES:
        raise InvalidParameterError(f"boundary must be one of {_BOUNDARIES}")
    rows = _sparse_core(M)
    t = len(rows)
    if exact:
        branch = max((sum(c for _, c in r) for r in rows), default=1)
        grow = depth if branch <= 1 else (branch**depth - 1) // (branch - 1)
        est = (lam.numerator.bit_length() + lam.denominator.bit_length() + 2) * (grow + 1)
        if est > max_bits:
            raise ResourceLimitError(
                f"exact marginal at depth {depth} needs ~{est} bits, cap is {max_bits}", max_bits)
        level = _boundary_pairs(boundary, depth, lam, t)
        one = Fraction(1)
    else:
        lamf = float(lam)
        level = [(float(a), float(b)) for a, b in _boundary_pairs(boundary, depth, lam, t)]
        one = 1.0
    for _ in range(depth):
        nxt = []
        for row in rows:
            empty = one
            occ = lam if exact else lamf
            for j, c in row:
                u, o = level[j]
                empty *= (u + o) ** c
                occ *= u**c
            if not exact:
                z = empty + occ
                empty, occ = empty / z, occ / z
            nxt.append((empty, occ))
        level = nxt
    out = []
    for u, o in level:
        z = u + o
        out.append(u / z if z else (Fraction(0) if exact else 0.0))
    return tuple(out)


def float_fixed_point(M, lam, iterations=10_000, tol=1e-15):
    """Approximate fixed point of the recurrence (averaged iteration, float64).

    Plain iteration can settle on a period-2 orbit; averaging consecutive
    iterates damps that, so this finds the unique fixed point even where
    spatial mixing fails.
    """
    rec = Recurrence(M, lam)
    x = [0.5] * rec.t
    for _ in range(iterations):
        y = rec.float(x)
        nxt = [(a + b) / 2 for a, b in zip(x, y)]
        if max(abs(a - b) for a, b in zip(nxt, x)) < tol:
            return nxt
        x = nxt
    return x
