"""Acceptable tuples and the rows of the potential-search LP.

For a type ``i`` with child slots ``j = 1..Delta_i`` a tuple ``(k0; k1..kDelta)``
picks an interval for the parent and one per child. It is acceptable when the
parent interval meets the range of the recurrence over the child box, and
then contributes the row

    (1 - X_k0) * sum_j (b[t_j, k_j] - a[t_j, k_j] * X[k_j]) - (b[i, k0] - a[i, k0] * Y_k0) <= v

Positivity rows ``a[i, k] * Y_k - b[i, k] <= v`` keep every piece positive.
Child slots of equal type are interchangeable, so tuples that only permute
such slots give identical rows; by default only the sorted representative
(nondecreasing interval indices within each run of equal child types) is
produced.
"""
from bisect import bisect_left, bisect_right
from collections import namedtuple
from fractions import Fraction
from itertools import combinations_with_replacement, groupby, product

import numpy as np
from scipy import sparse

from ..exact import parse_activity

AcceptableTuple = namedtuple("AcceptableTuple", "i k0 ks")
PositivityTag = namedtuple("PositivityTag", "i k")


class Layout:
    """Variable numbering and child slots for a matrix on a grid.

    Variables are ``a[i, k]``, ``b[i, k]`` interleaved per interval, then ``v``.
    """

    def __init__(self, M, grid):
        core = M.core
        if core.t != grid.t:
            raise ValueError(f"grid has {grid.t} types, matrix has {core.t}")
        self.matrix = core
        self.grid = grid
        self.t = core.t
        self.slots = [tuple(core.slots(i)) for i in range(core.t)]
        self.sizes = grid.sizes()
        self.offset = np.concatenate([[0], np.cumsum(self.sizes)]).astype(np.int64)
        self.n_intervals = int(self.offset[-1])
        self.n_vars = 2 * self.n_intervals + 1
        self.X = [grid.floats(i) for i in range(self.t)]

    def a(self, i, k):
        return 2 * (int(self.offset[i]) + k)

    def b(self, i, k):
        return 2 * (int(self.offset[i]) + k) + 1

    @property
    def v(self):
        return self.n_vars - 1

    def var_name(self, idx):
        if idx == self.v:
            return "v"
        cell, is_b = divmod(idx, 2)
        i = int(np.searchsorted(self.offset, cell, side="right")) - 1
        return f"{'b' if is_b else 'a'}_{i}_{cell - int(self.offset[i])}"

    def row(self, tag, positivity_floor=None):
        """Float coefficients ``{var: coef}`` and right-hand side of a tagged row.

        ``positivity_floor=None`` gives the plain ``a*Y - b <= v`` positivity
        rows; a number ``c`` gives ``a*Y - b <= -c`` instead.
        """
        coefs = {}
        if isinstance(tag, PositivityTag):
            Y = self.X[tag.i][tag.k + 1]
            coefs[self.a(tag.i, tag.k)] = Y
            coefs[self.b(tag.i, tag.k)] = -1.0
            if positivity_floor is None:
                coefs[self.v] = -1.0
                return coefs, 0.0
            return coefs, -float(positivity_floor)
        i, k0, ks = tag
        Xi = self.X[i]
        c = 1.0 - Xi[k0]
        for t, k in zip(self.slots[i], ks):
            ia, ib = self.a(t, k), self.b(t, k)
            coefs[ib] = coefs.get(ib, 0.0) + c
            coefs[ia] = coefs.get(ia, 0.0) - c * self.X[t][k]
        ia, ib = self.a(i, k0), self.b(i, k0)
        coefs[ib] = coefs.get(ib, 0.0) - 1.0
        coefs[ia] = coefs.get(ia, 0.0) + Xi[k0 + 1]
        coefs[self.v] = -1.0
        return coefs, 0.0

    def positivity_tags(self):
        return [PositivityTag(i, k) for i in range(self.t) for k in range(self.sizes[i])]


def child_combinations(slots, sizes, dedup=True):
    """Child interval tuples for the given slot types, in lexicographic order."""
    if not slots:
        return iter([()])
    if not dedup:
        return product(*(range(sizes[t]) for t in slots))
    runs = [(t, len(list(g))) for t, g in groupby(slots)]
    parts = [combinations_with_replacement(range(sizes[t]), r) for t, r in runs]
    return (sum(combo, ()) for combo in product(*parts))


def enumerate_acceptable(M, lam, grid, dedup=True, types=None):
    """Stream acceptable tuples in exact arithmetic.

    Order: types ascending, child tuples lexicographic, ``k0`` ascending.
    Nothing is materialized beyond one child tuple at a time.
    """
    lam = parse_activity(lam)
    core = M.core
    pts = grid.points
    sizes = grid.sizes()
    for i in (range(core.t) if types is None else types):
        slots = tuple(core.slots(i))
        Pi = pts[i]
        d = sizes[i]
        for ks in child_combinations(slots, sizes, dedup):
            px = py = Fraction(1)
            for t, k in zip(slots, ks):
                px *= pts[t][k]
                py *= pts[t][k + 1]
            lo = 1 / (1 + lam * py)
            hi = 1 / (1 + lam * px)
            # first k0 whose right end reaches lo, last whose left end is <= hi
            first = max(0, bisect_left(Pi, lo, 1) - 1)
            last = min(d - 1, bisect_right(Pi, hi) - 1)
            for k0 in range(first, last + 1):
                yield AcceptableTuple(i, k0, ks)


def count_acceptable(M, lam, grid, dedup=True):
    return sum(1 for _ in enumerate_acceptable(M, lam, grid, dedup))


class LpInstance:
    """A (possibly restricted) LP: minimize ``v`` subject to tagged rows ``<= rhs``.

    Box constraints ``0 <= a, b <= big`` are variable bounds; ``v`` is free
    above and bounded below by ``-big`` so restricted problems stay bounded.
    """

    def __init__(self, layout, tags, big=1e6, positivity_floor=None):
        tags = list(tags)
        pos = [t for t in tags if isinstance(t, PositivityTag)]
        con = [t for t in tags if not isinstance(t, PositivityTag)]
        if tags != con + pos:
            # keep the caller's row order for arbitrary mixes
            self._init_generic(layout, tags, big, positivity_floor)
            return
        self._init_arrays(layout, tag_array(con, layout), pos, big, positivity_floor)

    @classmethod
    def from_arrays(cls, layout, rows, big=1e6, positivity_floor=None):
        """Contraction rows given as an integer tag array, then every positivity row."""
        self = cls.__new__(cls)
        self._init_arrays(layout, np.asarray(rows, dtype=np.int64), layout.positivity_tags(),
                          big, positivity_floor)
        return self

    def _finish(self, layout, A, rhs, big, positivity_floor):
        self.layout = layout
        self.big = float(big)
        self.positivity_floor = positivity_floor
        self.A = A
        self.rhs = rhs
        self.cost = np.zeros(layout.n_vars)
        self.cost[layout.v] = 1.0
        self.lower = np.zeros(layout.n_vars)
        self.upper = np.full(layout.n_vars, self.big)
        self.lower[layout.v] = -self.big
        self.upper[layout.v] = np.inf

    def _init_generic(self, layout, tags, big, positivity_floor):
        rows, cols, vals, rhs = [], [], [], []
        for r, tag in enumerate(tags):
            coefs, b = layout.row(tag, positivity_floor)
            for c, val in coefs.items():
                if val != 0.0:
                    rows.append(r)
                    cols.append(c)
                    vals.append(val)
            rhs.append(b)
        self._tags = tags
        self._rows = None
        A = sparse.csr_matrix((vals, (rows, cols)), shape=(len(tags), layout.n_vars))
        self._finish(layout, A, np.array(rhs, dtype=float), big, positivity_floor)

    def _init_arrays(self, layout, rows, pos, big, positivity_floor):
        n_con = len(rows)
        r_idx, c_idx, vals = contraction_coo(layout, rows)
        # positivity rows: a*Y - b <= v, or <= -floor
        pi = np.array([t.i for t in pos], dtype=np.int64)
        pk = np.array([t.k for t in pos], dtype=np.int64)
        cells = layout.offset[pi] + pk if len(pos) else np.zeros(0, dtype=np.int64)
        Y = np.array([layout.X[i][k + 1] for i, k in zip(pi, pk)], dtype=float)
        pr = n_con + np.arange(len(pos))
        parts_r = [r_idx, pr, pr]
        parts_c = [c_idx, 2 * cells, 2 * cells + 1]
        parts_v = [vals, Y, -np.ones(len(pos))]
        rhs = np.zeros(n_con + len(pos))
        if positivity_floor is None:
            parts_r.append(pr)
            parts_c.append(np.full(len(pos), layout.v))
            parts_v.append(-np.ones(len(pos)))
        else:
            rhs[n_con:] = -float(positivity_floor)
        A = sparse.coo_matrix((np.concatenate(parts_v),
                               (np.concatenate(parts_r), np.concatenate(parts_c))),
                              shape=(n_con + len(pos), layout.n_vars)).tocsr()
        A.eliminate_zeros()
        self._tags = None
        self._rows = rows
        self._pos = list(pos)
        self._finish(layout, A, rhs, big, positivity_floor)

    @property
    def tags(self):
        if self._tags is None:
            self._tags = tags_from_array(self._rows, self.layout.slots) + self._pos
        return self._tags

    @property
    def n_rows(self):
        return self.A.shape[0]

    def row_names(self):
        return [row_name(t) for t in self.tags]

    def var_names(self):
        return [self.layout.var_name(j) for j in range(self.layout.n_vars)]

    def box_rows(self):
        """The box constraints written as rows ``(var, coef, rhs)``."""
        out = []
        for j in range(self.layout.n_vars - 1):
            name = self.layout.var_name(j)
            out.append((name, 1.0, self.big))
            out.append((name, -1.0, 0.0))
        return out


def tag_array(tags, layout):
    """Contraction tags as rows ``[i, k0, k1, ..., -1 padding]``."""
    width = max((len(s) for s in layout.slots), default=0) + 2
    out = np.full((len(tags), width), -1, dtype=np.int64)
    for r, (i, k0, ks) in enumerate(tags):
        out[r, 0] = i
        out[r, 1] = k0
        out[r, 2:2 + len(ks)] = ks
    return out


def tags_from_array(rows, slots):
    out = []
    for r in np.asarray(rows).tolist():
        i = r[0]
        out.append(AcceptableTuple(i, r[1], tuple(r[2:2 + len(slots[i])])))
    return out


def contraction_coo(layout, rows):
    """COO triplets of the contraction rows in a tag array (duplicates summed later)."""
    rows = np.asarray(rows, dtype=np.int64)
    if len(rows) == 0:
        z = np.zeros(0, dtype=np.int64)
        return z, z, np.zeros(0)
    X_flat = np.concatenate(layout.X)
    xoff = layout.offset[:-1] + np.arange(layout.t)
    parts_r, parts_c, parts_v = [], [], []
    for i in np.unique(rows[:, 0]):
        sel = np.flatnonzero(rows[:, 0] == i)
        sub = rows[sel]
        k0 = sub[:, 1]
        c = 1.0 - X_flat[xoff[i] + k0]
        for q, t in enumerate(layout.slots[i]):
            kq = sub[:, 2 + q]
            cell = layout.offset[t] + kq
            parts_r += [sel, sel]
            parts_c += [2 * cell + 1, 2 * cell]
            parts_v += [c, -c * X_flat[xoff[t] + kq]]
        cell = layout.offset[i] + k0
        parts_r += [sel, sel, sel]
        parts_c += [2 * cell + 1, 2 * cell, np.full(len(sel), layout.v)]
        parts_v += [-np.ones(len(sel)), X_flat[xoff[i] + k0 + 1], -np.ones(len(sel))]
    return np.concatenate(parts_r), np.concatenate(parts_c), np.concatenate(parts_v)


def emit_constraints(M, lam, grid, tuples, big=1e6, positivity_floor=None):
    """LP with one row per given tuple plus all positivity rows."""
    layout = Layout(M, grid)
    tags = list(tuples) + layout.positivity_tags()
    return LpInstance(layout, tags, big, positivity_floor)


def row_name(tag):
    if isinstance(tag, PositivityTag):
        return f"P_{tag.i}_{tag.k}"
    return "C_" + "_".join(str(x) for x in (tag.i, tag.k0) + tuple(tag.ks))


def parse_row_name(name):
    parts = name.split("_")
    if parts[0] == "P":
        return PositivityTag(int(parts[1]), int(parts[2]))
    if parts[0] == "C":
        nums = [int(x) for x in parts[1:]]
        return AcceptableTuple(nums[0], nums[1], tuple(nums[2:]))
    raise ValueError(f"not a row name: {name!r}")
