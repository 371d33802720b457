"""Exact verification of piecewise-linear potentials.

This is the only path that produces an SSM certificate. It re-enumerates all
acceptable tuples and checks every inequality strictly in integer arithmetic;
nothing here depends on the LP solver or on the float scan.
"""
import random
from dataclasses import dataclass
from fractions import Fraction
from math import lcm

from ..branching import BranchingMatrix
from ..exact import format_rational, parse_activity, parse_rational
from . import kernels
from .constraints import AcceptableTuple, PositivityTag, row_name
from .grid import IntervalGrid

DEFAULT_BIG = 10**6


@dataclass(frozen=True)
class PiecewisePotential:
    """Per type and interval, ``psi(x) = b - a*x`` on ``[X_k, X_{k+1}]``."""

    a: tuple
    b: tuple
    big: int = DEFAULT_BIG

    def __post_init__(self):
        a = tuple(tuple(Fraction(x) for x in row) for row in self.a)
        b = tuple(tuple(Fraction(x) for x in row) for row in self.b)
        if [len(r) for r in a] != [len(r) for r in b]:
            raise ValueError("a and b must have the same shape")
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "b", b)

    @classmethod
    def zero(cls, grid):
        z = tuple((Fraction(0),) * n for n in grid.sizes())
        return cls(z, z)

    def flat(self):
        return [x for row in self.a for x in row], [x for row in self.b for x in row]

    def value(self, grid, i, x):
        """Float value of the type-``i`` piece containing ``x``."""
        pts = grid.points[i]
        k = 0
        while k < len(pts) - 2 and x >= float(pts[k + 1]):
            k += 1
        return float(self.b[i][k]) - float(self.a[i][k]) * x

    def split(self, parents):
        """Coefficients on a refined grid: each new interval copies its parent's."""
        a = tuple(tuple(self.a[i][k] for k in par) for i, par in enumerate(parents))
        b = tuple(tuple(self.b[i][k] for k in par) for i, par in enumerate(parents))
        return PiecewisePotential(a, b, self.big)

    def perturbed(self, which, i, k, delta):
        rows = {"a": [list(r) for r in self.a], "b": [list(r) for r in self.b]}
        rows[which][i][k] += Fraction(delta)
        return PiecewisePotential(rows["a"], rows["b"], self.big)

    def to_dict(self):
        return {"a": [[format_rational(x) for x in r] for r in self.a],
                "b": [[format_rational(x) for x in r] for r in self.b],
                "big": str(self.big)}

    @classmethod
    def from_dict(cls, d):
        return cls(tuple(tuple(parse_rational(x) for x in r) for r in d["a"]),
                   tuple(tuple(parse_rational(x) for x in r) for r in d["b"]),
                   int(d.get("big", DEFAULT_BIG)))


@dataclass(frozen=True)
class PotentialViolation:
    kind: str  # "box", "positivity" or "contraction"
    tag: object
    slack: Fraction

    @property
    def row(self):
        if self.kind == "box":
            return f"B_{self.tag[0]}_{self.tag[1]}_{self.tag[2]}"
        return row_name(self.tag)

    def __bool__(self):
        return False

    def __str__(self):
        return f"{self.kind} row {self.row} violated (slack {format_rational(self.slack)})"


@dataclass(frozen=True)
class SsmPotentialCert:
    matrix: BranchingMatrix
    lam: Fraction
    grid: IntervalGrid
    potential: PiecewisePotential
    margin: Fraction
    n_rows: int
    tightest: str

    def to_dict(self):
        return {"matrix": self.matrix.to_dict(), "lambda": format_rational(self.lam),
                "grid": self.grid.to_dict(), "potential": self.potential.to_dict(),
                "margin": format_rational(self.margin), "rows_checked": self.n_rows,
                "tightest_row": self.tightest}

    @classmethod
    def from_dict(cls, d):
        return cls(BranchingMatrix.from_dict(d["matrix"]), parse_activity(d["lambda"]),
                   IntervalGrid.from_dict(d["grid"]), PiecewisePotential.from_dict(d["potential"]),
                   parse_rational(d["margin"]), int(d["rows_checked"]), d.get("tightest_row", ""))


def verify_potential(M, lam, grid, potential, backend=None):
    """Certificate if every row holds strictly, else the first violated row.

    Rows are checked box first, then positivity ``b - a*Y > 0`` in ``(i, k)``
    order, then all contraction rows in enumeration order.
    """
    lam = parse_activity(lam)
    if grid.lam != lam:
        raise ValueError("grid was built for a different activity")
    sizes = grid.sizes()
    if [len(r) for r in potential.a] != sizes:
        raise ValueError("potential does not match the grid")
    big = potential.big
    for i in range(grid.t):
        for k in range(sizes[i]):
            for name, val in (("a", potential.a[i][k]), ("b", potential.b[i][k])):
                if val < 0:
                    return PotentialViolation("box", (name, i, k), val)
                if val > big:
                    return PotentialViolation("box", (name, i, k), big - val)
    margin = None
    tightest = None
    for i in range(grid.t):
        for k in range(sizes[i]):
            slack = potential.b[i][k] - potential.a[i][k] * grid.points[i][k + 1]
            if slack <= 0:
                return PotentialViolation("positivity", PositivityTag(i, k), slack)
            if margin is None or slack < margin:
                margin, tightest = slack, PositivityTag(i, k)
    a, b = potential.flat()
    Q = lcm(*(x.denominator for x in a + b))
    A = [x.numerator * (Q // x.denominator) for x in a]
    B = [x.numerator * (Q // x.denominator) for x in b]
    prob = kernels.KernelProblem(M, lam, grid)
    n_rows, bad, best = kernels.verify_exact(prob, A, B, backend=backend)
    unit = Q * prob.D * prob.D
    if bad is not None:
        tag = AcceptableTuple(*bad)
        return PotentialViolation("contraction", tag, kernels._slack(prob, A, B, bad) / Fraction(unit))
    if best is not None:
        slack = Fraction(best[0], unit)
        if slack < margin:
            margin, tightest = slack, AcceptableTuple(*best[1])
    return SsmPotentialCert(M.core, lam, grid, potential, margin, n_rows + sum(sizes),
                            row_name(tightest))


def spot_check(M, lam, grid, potential, samples=10_000, seed=0):
    """Largest sampled contraction ratio ``(1 - x_i)/psi_i(x_i) * sum psi(x_child)``.

    Children are drawn uniformly from ``[1/(1+lam), 1]`` and ``x_i`` follows
    from the recurrence. A valid certificate keeps the ratio below 1.
    """
    core = M.core
    lamf = float(parse_activity(lam))
    lo = 1.0 / (1.0 + lamf)
    rng = random.Random(seed)
    types = [i for i in range(core.t) if core.slots(i)]
    worst = 0.0
    for _ in range(samples):
        i = rng.choice(types)
        slots = core.slots(i)
        xs = [rng.uniform(lo, 1.0) for _ in slots]
        prod = 1.0
        for x in xs:
            prod *= x
        xi = 1.0 / (1.0 + lamf * prod)
        total = sum(potential.value(grid, t, x) for t, x in zip(slots, xs))
        worst = max(worst, (1.0 - xi) / potential.value(grid, i, xi) * total)
    return worst
