"""Pure-Python kernels: vectorized float scanning and exact integer verification.

Both functions walk the same tuple order as the compiled kernels (types
ascending, child tuples lexicographic, ``k0`` ascending) so that results,
including tie-breaking, agree between implementations.
"""
from itertools import combinations_with_replacement, groupby, product

import numpy as np

# Relative slack used by the float scan so that rounding never hides a
# borderline acceptable tuple. Exact verification does not use it.
ACCEPT_EPS = 1e-12


def _child_matrix(slots, sizes):
    """All sorted child tuples of a type as an integer array (rows lexicographic)."""
    if not slots:
        return np.zeros((1, 0), dtype=np.int64)
    runs = [(t, len(list(g))) for t, g in groupby(slots)]
    parts = [np.array(list(combinations_with_replacement(range(sizes[t]), r)), dtype=np.int64)
             .reshape(-1, r) for t, r in runs]
    out = parts[0]
    for part in parts[1:]:
        n1, n2 = len(out), len(part)
        out = np.hstack([np.repeat(out, n2, axis=0), np.tile(part, (n1, 1))])
    return out


def scan(prob, psi_x, psi_y, threshold, top_k, want_prices=False, price_floor=0.0):
    """Row values ``g`` of every acceptable tuple at a candidate potential.

    ``psi_x[cell]``/``psi_y[cell]`` are the candidate's values at the left and
    right end of each interval (``cell = offset[i] + k``). Returns the maximum
    ``g``, the row count, the number of rows with ``g > threshold``, the
    ``top_k`` largest of those as ``(values, tags)`` sorted by decreasing
    value then enumeration order, and optionally per-cell prices: the sum of
    ``max(g - price_floor, 0)`` over rows that touch the cell.
    """
    lam = prob.lam_float
    offset = prob.offset
    prices = np.zeros(prob.n_cells) if want_prices else None
    best_vals = np.empty(0)
    best_tags = np.empty((0, prob.max_deg + 2), dtype=np.int64)
    best_order = np.empty(0, dtype=np.int64)
    max_g = -np.inf
    n_rows = 0
    n_above = 0
    for i in range(prob.t):
        slots = prob.slots[i]
        ks = _child_matrix(slots, prob.sizes)
        X = prob.X
        px = np.ones(len(ks))
        py = np.ones(len(ks))
        s = np.zeros(len(ks))
        cells = np.empty_like(ks)
        for q, t in enumerate(slots):
            kq = ks[:, q]
            px *= X[t][kq]
            py *= X[t][kq + 1]
            cells[:, q] = offset[t] + kq
            s += psi_x[cells[:, q]]
        lo = 1.0 / (1.0 + lam * py)
        hi = 1.0 / (1.0 + lam * px)
        Xi = X[i]
        d = prob.sizes[i]
        first = np.maximum(np.searchsorted(Xi[1:], lo * (1 - ACCEPT_EPS), side="left"), 0)
        last = np.minimum(np.searchsorted(Xi, hi * (1 + ACCEPT_EPS), side="right") - 1, d - 1)
        counts = np.maximum(last - first + 1, 0)
        total = int(counts.sum())
        if total == 0:
            continue
        rep = np.repeat(np.arange(len(ks)), counts)
        starts = np.cumsum(counts) - counts
        k0 = first[rep] + (np.arange(total) - starts[rep])
        g = (1.0 - Xi[k0]) * s[rep] - psi_y[offset[i] + k0]
        n_rows += total
        max_g = max(max_g, float(g.max()))
        if want_prices:
            pos = np.maximum(g - price_floor, 0.0)
            np.add.at(prices, offset[i] + k0, pos)
            for q in range(len(slots)):
                np.add.at(prices, cells[rep, q], pos)
        sel = np.flatnonzero(g > threshold)
        n_above += len(sel)
        if len(sel) == 0:
            continue
        if len(sel) > top_k:
            part = np.argpartition(-g[sel], top_k - 1)[:top_k]
            sel = np.sort(sel[part])
        tags = np.full((len(sel), prob.max_deg + 2), -1, dtype=np.int64)
        tags[:, 0] = i
        tags[:, 1] = k0[sel]
        if len(slots):
            tags[:, 2:2 + len(slots)] = ks[rep[sel]]
        order = n_rows - total + sel
        best_vals = np.concatenate([best_vals, g[sel]])
        best_tags = np.vstack([best_tags, tags])
        best_order = np.concatenate([best_order, order])
        if len(best_vals) > top_k:
            keep = np.lexsort((best_order, -best_vals))[:top_k]
            best_vals, best_tags, best_order = best_vals[keep], best_tags[keep], best_order[keep]
    keep = np.lexsort((best_order, -best_vals))
    return ScanOutput(max_g, n_rows, n_above, best_vals[keep], best_tags[keep], prices)


class ScanOutput:
    __slots__ = ("max_g", "n_rows", "n_above", "values", "tags", "prices")

    def __init__(self, max_g, n_rows, n_above, values, tags, prices):
        self.max_g = max_g
        self.n_rows = n_rows
        self.n_above = n_above
        self.values = values
        self.tags = tags
        self.prices = prices


def verify_exact(prob, A, B):
    """Check every contraction row strictly in integers.

    ``A``/``B`` are coefficient numerators over a common denominator, per
    cell; breakpoints are ``prob.N[i][k] / prob.D``. With
    ``G = B*D - A*n`` a row holds iff ``H*D - S*(D - n_k0) > 0`` where ``S`` sums
    ``G`` at the children's left ends and ``H`` is ``G`` at the parent's right
    end. Returns ``(n_rows, first_bad, best)``; ``first_bad`` is the first
    failing tag in enumeration order (or None) and ``best`` is
    ``(slack, tag)`` for the smallest slack.
    """
    D = prob.D
    p, q = prob.p, prob.q
    N = prob.N
    offset = prob.offset
    n_rows = 0
    first_bad = None
    best = None
    for i in range(prob.t):
        slots = prob.slots[i]
        deg = len(slots)
        Ni = N[i]
        d = prob.sizes[i]
        Gy = [B[offset[i] + k] * D - A[offset[i] + k] * Ni[k + 1] for k in range(d)]
        Dd = D**deg
        qDd = q * Dd
        qDd1 = qDd * D
        runs = [(t, len(list(g))) for t, g in groupby(slots)]
        parts = [combinations_with_replacement(range(prob.sizes[t]), r) for t, r in runs]
        for combo in product(*parts):
            ks = sum(combo, ())
            nx = ny = 1
            s = 0
            for t, k in zip(slots, ks):
                nx *= N[t][k]
                ny *= N[t][k + 1]
                c = offset[t] + k
                s += B[c] * D - A[c] * N[t][k]
            den_hi = qDd + p * nx  # hi = qDd / den_hi
            den_lo = qDd + p * ny
            # first k0 with N[k0+1] * den_lo >= qDd1; last with N[k0] * den_hi <= qDd1
            lo_k, hi_k = 0, d - 1
            a_, b_ = 0, d
            while a_ < b_:
                m = (a_ + b_) // 2
                if Ni[m + 1] * den_lo >= qDd1:
                    b_ = m
                else:
                    a_ = m + 1
            lo_k = a_
            a_, b_ = -1, d - 1
            while a_ < b_:
                m = (a_ + b_ + 1) // 2
                if Ni[m] * den_hi <= qDd1:
                    a_ = m
                else:
                    b_ = m - 1
            hi_k = a_
            for k0 in range(lo_k, hi_k + 1):
                n_rows += 1
                slack = Gy[k0] * D - s * (D - Ni[k0])
                tag = (i, k0, ks)
                if slack <= 0 and first_bad is None:
                    first_bad = tag
                if best is None or slack < best[0]:
                    best = (slack, tag)
    return n_rows, first_bad, best
