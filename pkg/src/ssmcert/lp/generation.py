"""Constraint generation, interval refinement and the end-to-end SSM pipeline.

The restricted LP always contains every positivity row, written with a unit
floor ``a*Y - b <= -1`` so that a candidate never collapses to zero; contraction
rows are ``... <= v`` and the objective is ``min v``. Scaling a feasible point
makes ``v`` more negative, so ``v < 0`` at the optimum exactly when the strict
system is feasible, while an infeasible grid still yields a non-trivial
candidate whose violations can be priced.
"""
import csv
import math
import time
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from ..errors import SolverError
from ..exact import parse_activity
from . import kernels
from .constraints import Layout, LpInstance, tag_array
from .grid import grid_for_matrix
from .solvers import default_adapter, dump_instance
from .verify import DEFAULT_BIG, PiecewisePotential, verify_potential

DEFAULT_BATCH = 5000
DEFAULT_MARGIN = 1e-7
RATIONAL_DIGITS = 9


@dataclass
class Candidate:
    """Float coefficients per cell, normalized so the largest is 1."""

    a: np.ndarray
    b: np.ndarray
    v: float  # restricted LP optimum in the same normalization

    @classmethod
    def from_lp(cls, layout, x):
        n = layout.n_intervals
        a, b = np.maximum(x[0:2 * n:2], 0.0), np.maximum(x[1:2 * n:2], 0.0)
        scale = max(float(a.max(initial=0.0)), float(b.max(initial=0.0)), 1e-300)
        return cls(a / scale, b / scale, float(x[-1]) / scale)

    def psi(self, prob):
        left = np.concatenate([x[:-1] for x in prob.X])
        right = np.concatenate([x[1:] for x in prob.X])
        return self.b - self.a * left, self.b - self.a * right

    def split(self, parents, sizes_old):
        offs = np.concatenate([[0], np.cumsum(sizes_old)])
        idx = np.concatenate([offs[i] + np.asarray(par, dtype=np.int64)
                              for i, par in enumerate(parents)])
        return Candidate(self.a[idx], self.b[idx], self.v)


@dataclass
class GenerationResult:
    status: str  # "feasible", "infeasible", "tight" or "budget"
    candidate: Candidate
    max_violation: float
    rounds: int
    active: np.ndarray  # contraction tags of the restricted LP, one per row
    n_acceptable: int
    trace: list = field(default_factory=list)


def _deadline_passed(deadline):
    return deadline is not None and time.monotonic() > deadline


def solve_with_generation(M, lam, grid, solver=None, batch=DEFAULT_BATCH, initial=(),
                          max_rounds=500, margin=DEFAULT_MARGIN, big=DEFAULT_BIG,
                          deadline=None, backend=None, log=None):
    """Solve restricted LPs, adding the ``batch`` most violated rows each round.

    Stops with ``feasible`` once the candidate satisfies every acceptable row
    with normalized slack above ``margin``, with ``infeasible`` when the
    restricted optimum is already ``>= 0`` (so the full LP is infeasible too),
    and with ``tight`` when the optimum is negative but within ``margin``.
    ``log`` receives each trace row as soon as its round finishes.
    """
    lam = parse_activity(lam)
    solver = solver or default_adapter()
    layout = Layout(M, grid)
    prob = kernels.KernelProblem(M, lam, grid)
    width = prob.max_deg + 2
    if isinstance(initial, np.ndarray):
        active = initial.reshape(-1, width).astype(np.int64)
    else:
        active = tag_array(list(initial), layout)
    active = np.unique(active, axis=0) if len(active) else active
    seen = {r.tobytes() for r in active}
    trace = []
    cand = None
    out = None
    for rnd in range(1, max_rounds + 1):
        inst = LpInstance.from_arrays(layout, active, big, positivity_floor=1.0)
        t0 = time.monotonic()
        res = solver.solve(inst)
        t_lp = time.monotonic() - t0
        if not res.ok:
            # the restricted problem is feasible by construction
            path = dump_instance(inst, f"status {res.status}: {res.message}")
            raise SolverError(f"restricted LP returned {res.status}; dumped to {path}", path)
        cand = Candidate.from_lp(layout, res.x)
        psi_x, psi_y = cand.psi(prob)
        t0 = time.monotonic()
        out = kernels.scan(prob, psi_x, psi_y, cand.v + 1e-12, batch, backend=backend)
        t_scan = time.monotonic() - t0
        trace.append({"round": rnd, "rows": len(active), "v": cand.v, "max_g": out.max_g,
                      "above": out.n_above, "acceptable": out.n_rows,
                      "lp_seconds": round(t_lp, 4), "scan_seconds": round(t_scan, 4)})
        if log:
            log(trace[-1])
        if out.max_g < -margin:
            return GenerationResult("feasible", cand, out.max_g, rnd, active, out.n_rows, trace)
        if cand.v >= 0:
            return GenerationResult("infeasible", cand, out.max_g, rnd, active, out.n_rows, trace)
        new = [r for r in out.tags if r.tobytes() not in seen]
        if cand.v >= -margin or not new:
            return GenerationResult("tight", cand, out.max_g, rnd, active, out.n_rows, trace)
        active = np.vstack([active, np.array(new)])
        seen.update(r.tobytes() for r in new)
        if _deadline_passed(deadline):
            break
    return GenerationResult("budget", cand, out.max_g if out else math.inf,
                            len(trace), active, out.n_rows if out else 0, trace)


def interval_prices(M, lam, grid, candidate, price_floor=0.0, backend=None):
    """Per-cell price: summed excess of ``g`` over ``price_floor`` times the cell width."""
    prob = kernels.KernelProblem(M, lam, grid)
    psi_x, psi_y = candidate.psi(prob)
    out = kernels.scan(prob, psi_x, psi_y, np.inf, 1, want_prices=True,
                       price_floor=price_floor, backend=backend)
    widths = np.concatenate([np.diff(x) for x in prob.X])
    return out.prices * widths


def refine_intervals(M, lam, grid, candidate, top_n, min_width=Fraction(1, 10**5),
                     d_max=400, price_floor=0.0, return_parents=False, backend=None):
    """Halve the ``top_n`` highest-priced intervals.

    Rows count towards a price by how far they exceed ``price_floor``, so with
    the default floor a candidate that satisfies every row leaves the grid
    unchanged. Intervals narrower than ``2*min_width`` and types that already
    have ``d_max`` intervals are left alone.
    """
    prices = interval_prices(M, lam, grid, candidate, price_floor, backend)
    sizes = grid.sizes()
    offs = np.concatenate([[0], np.cumsum(sizes)])
    order = sorted(np.flatnonzero(prices > 0), key=lambda c: (-prices[c], c))
    room = list(sizes)
    marks = []
    for c in order:
        if len(marks) >= top_n:
            break
        i = int(np.searchsorted(offs, c, side="right")) - 1
        k = int(c - offs[i])
        if room[i] >= d_max or grid.width(i, k) < 2 * min_width:
            continue
        room[i] += 1
        marks.append((i, k))
    if not marks:
        parents = [tuple(range(n)) for n in sizes]
        return (grid, parents) if return_parents else grid
    new, parents = grid.split(marks, min_width)
    return (new, parents) if return_parents else new


def rationalize(candidate, layout, digits=RATIONAL_DIGITS, big=DEFAULT_BIG):
    """Round normalized coefficients to ``digits`` decimals as exact fractions."""
    Q = 10**digits
    a = [Fraction(int(round(x * Q)), Q) for x in candidate.a]
    b = [Fraction(int(round(x * Q)), Q) for x in candidate.b]
    rows_a, rows_b = [], []
    for i in range(layout.t):
        lo, hi = int(layout.offset[i]), int(layout.offset[i + 1])
        rows_a.append(a[lo:hi])
        rows_b.append(b[lo:hi])
    return PiecewisePotential(rows_a, rows_b, big)


@dataclass
class PipelineResult:
    status: str  # "certified", "not-certified" or "budget"
    lam: Fraction
    certificate: object
    grid: object
    candidate: Candidate
    refinements: int
    lp_rounds: int
    elapsed: float
    trace: list
    reason: str = ""

    @property
    def certified(self):
        return self.status == "certified"


def _warm_tags(M, lam, grid, candidate, batch, backend):
    prob = kernels.KernelProblem(M, lam, grid)
    psi_x, psi_y = candidate.psi(prob)
    out = kernels.scan(prob, psi_x, psi_y, -np.inf, batch, backend=backend)
    return out.tags


def pipeline(M, lam, d=20, grid=None, solver=None, batch=DEFAULT_BATCH, top_n=None,
             max_refinements=200, min_width=Fraction(1, 10**5), d_max=400, budget=None,
             margin=DEFAULT_MARGIN, big=DEFAULT_BIG, backend=None, log=None):
    """Generate, refine and exactly verify until certified or out of options.

    ``budget`` is in seconds. ``log`` receives one dict per LP round.
    """
    lam = parse_activity(lam)
    solver = solver or default_adapter()
    start = time.monotonic()
    deadline = start + budget if budget else None
    grid = grid or grid_for_matrix(M, lam, d)
    warm = ()
    trace = []
    lp_rounds = 0
    cand = None
    reason = ""
    for refinement in range(max_refinements + 1):
        def record(row, refinement=refinement, cells=sum(grid.sizes())):
            row = dict(row, refinement=refinement, cells=cells,
                       elapsed=round(time.monotonic() - start, 3))
            trace.append(row)
            if log:
                log(row)

        gen = solve_with_generation(M, lam, grid, solver, batch, warm, margin=margin, big=big,
                                    deadline=deadline, backend=backend, log=record)
        lp_rounds += gen.rounds
        cand = gen.candidate
        if gen.status == "feasible":
            layout = Layout(M, grid)
            pot = rationalize(cand, layout, big=big)
            cert = verify_potential(M, lam, grid, pot, backend=backend)
            if cert:
                return PipelineResult("certified", lam, cert, grid, cand, refinement, lp_rounds,
                                      time.monotonic() - start, trace)
            # rounding lost the margin: demand more slack and keep the offending row
            margin *= 10
            warm = gen.active
            if cert.kind == "contraction":
                extra = tag_array([cert.tag], Layout(M, grid))
                warm = np.vstack([warm.reshape(-1, extra.shape[1]), extra])
            reason = f"rounded potential failed: {cert}"
            if margin > 1e-2:
                break
            continue
        if gen.status == "budget" or _deadline_passed(deadline):
            return PipelineResult("budget", lam, None, grid, cand, refinement, lp_rounds,
                                  time.monotonic() - start, trace, "time budget exhausted")
        n_top = top_n or max(4, sum(grid.sizes()) // 3)
        # a tight optimum (v < 0 but not below the margin) still needs splits,
        # so rows within 2|v| of violation are priced as well
        floor = 0.0 if cand.v >= 0 else 2.0 * cand.v
        new, parents = refine_intervals(M, lam, grid, cand, n_top, min_width, d_max, floor,
                                        return_parents=True, backend=backend)
        if new is grid:
            reason = f"grid cannot be refined further ({gen.status})"
            break
        cand = cand.split(parents, grid.sizes())
        grid = new
        warm = _warm_tags(M, lam, grid, cand, batch, backend)
        reason = gen.status
    return PipelineResult("not-certified", lam, None, grid, cand, max_refinements, lp_rounds,
                          time.monotonic() - start, trace, reason)


@dataclass
class SweepRow:
    lam: Fraction
    status: str
    elapsed: float
    cells: int
    lp_rounds: int
    margin: Fraction = None


def ssm_threshold_sweep(M, lambdas, budget=None, **kwargs):
    """Run :func:`pipeline` for each activity in ascending order.

    Returns ``(rows, largest_certified)``; ``largest_certified`` is None when
    nothing was certified. Infeasibility is reported as such and never read as
    evidence that SSM fails.
    """
    start = time.monotonic()
    rows = []
    best = None
    for lam in sorted(parse_activity(x) for x in lambdas):
        remaining = None
        if budget is not None:
            remaining = budget - (time.monotonic() - start)
            if remaining <= 0:
                rows.append(SweepRow(lam, "budget", 0.0, 0, 0))
                continue
        res = pipeline(M, lam, budget=remaining, **kwargs)
        margin = res.certificate.margin if res.certified else None
        rows.append(SweepRow(lam, res.status, round(res.elapsed, 3), sum(res.grid.sizes()),
                             res.lp_rounds, margin))
        if res.certified:
            best = lam
    return rows, best


def write_trace_csv(rows, path):
    """Write dict rows (an LP trace or sweep table) as CSV."""
    rows = [r if isinstance(r, dict) else r.__dict__ for r in rows]
    fields = []
    for r in rows:
        fields.extend(k for k in r if k not in fields)
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=fields)
        w.writeheader()
        for r in rows:
            w.writerow({k: (str(v) if isinstance(v, Fraction) else v) for k, v in r.items()})
    return path


def potential_csv(grid, potential, path):
    """Step/linear pieces of every type's potential, one row per interval."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["type", "interval", "x_left", "x_right", "a", "b", "psi_left", "psi_right"])
        for i in range(grid.t):
            pts = grid.points[i]
            for k in range(len(pts) - 1):
                a, b = potential.a[i][k], potential.b[i][k]
                w.writerow([i, k, float(pts[k]), float(pts[k + 1]), float(a), float(b),
                            float(b - a * pts[k]), float(b - a * pts[k + 1])])
    return path
