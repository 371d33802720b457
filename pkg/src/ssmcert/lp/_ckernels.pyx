# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled scanning and exact verification loops.

Same tuple order and tie-breaking as ``_pykernels``. Exact checks use the
GCC/Clang 128-bit integer; the caller guarantees every intermediate fits.
"""
import numpy as np

from libc.stdint cimport int64_t

cdef extern from *:
    """
    typedef __int128 ssm_i128;
    """
    ctypedef long long ssm_i128

cdef enum:
    MAXDEG = 32

cdef double ACCEPT_EPS = 1e-12


cdef inline bint _heap_less(double va, int64_t oa, double vb, int64_t ob):
    # "less" = evicted first: lower value, or equal value and later in order
    return va < vb or (va == vb and oa > ob)


cdef void _sift_down(double[::1] hv, int64_t[::1] ho, int64_t[::1] hs, Py_ssize_t n, Py_ssize_t pos):
    cdef Py_ssize_t child, right
    cdef double v
    cdef int64_t o, s
    v = hv[pos]; o = ho[pos]; s = hs[pos]
    while True:
        child = 2 * pos + 1
        if child >= n:
            break
        right = child + 1
        if right < n and _heap_less(hv[right], ho[right], hv[child], ho[child]):
            child = right
        if _heap_less(hv[child], ho[child], v, o):
            hv[pos] = hv[child]; ho[pos] = ho[child]; hs[pos] = hs[child]
            pos = child
        else:
            break
    hv[pos] = v; ho[pos] = o; hs[pos] = s


cdef void _sift_up(double[::1] hv, int64_t[::1] ho, int64_t[::1] hs, Py_ssize_t pos):
    cdef Py_ssize_t parent
    cdef double v = hv[pos]
    cdef int64_t o = ho[pos], s = hs[pos]
    while pos > 0:
        parent = (pos - 1) // 2
        if _heap_less(v, o, hv[parent], ho[parent]):
            hv[pos] = hv[parent]; ho[pos] = ho[parent]; hs[pos] = hs[parent]
            pos = parent
        else:
            break
    hv[pos] = v; ho[pos] = o; hs[pos] = s


def scan(prob, double[::1] psi_x, double[::1] psi_y, double threshold, Py_ssize_t top_k,
         bint want_prices=False, double price_floor=0.0):
    cdef int64_t[::1] slot_types = prob.slot_types
    cdef int64_t[::1] slot_off = prob.slot_off
    cdef signed char[::1] same_prev = prob.same_prev
    cdef int64_t[::1] sizes = prob.sizes_arr
    cdef int64_t[::1] offset = prob.offset
    cdef int64_t[::1] xoff = prob.xoff
    cdef double[::1] X = prob.X_flat
    cdef double lam = prob.lam_float
    cdef Py_ssize_t t = prob.t, width = prob.max_deg + 2
    cdef Py_ssize_t n_cells = prob.n_cells

    prices_arr = np.zeros(n_cells if want_prices else 1)
    cdef double[::1] prices = prices_arr
    if top_k < 1:
        top_k = 1
    hv_arr = np.empty(top_k); ho_arr = np.empty(top_k, dtype=np.int64)
    hs_arr = np.empty(top_k, dtype=np.int64)
    tags_arr = np.full((top_k, width), -1, dtype=np.int64)
    cdef double[::1] hv = hv_arr
    cdef int64_t[::1] ho = ho_arr
    cdef int64_t[::1] hs = hs_arr
    cdef int64_t[:, ::1] tags = tags_arr
    cdef Py_ssize_t heap_n = 0

    cdef int64_t ks[MAXDEG]
    cdef int64_t cells[MAXDEG]
    cdef Py_ssize_t i, q, r, deg, d, base, lo_k, hi_k, a_, b_, m, k0, slot
    cdef int64_t ty
    cdef double px, py, s, lo, hi, g
    cdef double max_g = -np.inf
    cdef int64_t n_rows = 0, n_above = 0

    for i in range(t):
        base = slot_off[i]
        deg = slot_off[i + 1] - base
        if deg > MAXDEG:
            raise ValueError("row degree exceeds compiled limit")
        d = sizes[i]
        for q in range(deg):
            ks[q] = 0
        while True:
            px = 1.0; py = 1.0; s = 0.0
            for q in range(deg):
                ty = slot_types[base + q]
                px *= X[xoff[ty] + ks[q]]
                py *= X[xoff[ty] + ks[q] + 1]
                cells[q] = offset[ty] + ks[q]
                s += psi_x[cells[q]]
            lo = (1.0 / (1.0 + lam * py)) * (1.0 - ACCEPT_EPS)
            hi = (1.0 / (1.0 + lam * px)) * (1.0 + ACCEPT_EPS)
            # first k0 with X[k0+1] >= lo
            a_ = 0; b_ = d
            while a_ < b_:
                m = (a_ + b_) // 2
                if X[xoff[i] + m + 1] >= lo:
                    b_ = m
                else:
                    a_ = m + 1
            lo_k = a_
            # last k0 with X[k0] <= hi
            a_ = -1; b_ = d - 1
            while a_ < b_:
                m = (a_ + b_ + 1) // 2
                if X[xoff[i] + m] <= hi:
                    a_ = m
                else:
                    b_ = m - 1
            hi_k = a_
            for k0 in range(lo_k, hi_k + 1):
                g = (1.0 - X[xoff[i] + k0]) * s - psi_y[offset[i] + k0]
                n_rows += 1
                if g > max_g:
                    max_g = g
                if want_prices and g > price_floor:
                    prices[offset[i] + k0] += g - price_floor
                    for q in range(deg):
                        prices[cells[q]] += g - price_floor
                if g > threshold:
                    n_above += 1
                    if heap_n < top_k:
                        slot = heap_n
                        hv[heap_n] = g; ho[heap_n] = n_rows - 1; hs[heap_n] = slot
                        heap_n += 1
                        _sift_up(hv, ho, hs, heap_n - 1)
                    elif _heap_less(hv[0], ho[0], g, n_rows - 1):
                        slot = hs[0]
                        hv[0] = g; ho[0] = n_rows - 1
                        _sift_down(hv, ho, hs, heap_n, 0)
                    else:
                        continue
                    tags[slot, 0] = i
                    tags[slot, 1] = k0
                    for q in range(deg):
                        tags[slot, 2 + q] = ks[q]
                    for q in range(deg, width - 2):
                        tags[slot, 2 + q] = -1
            # advance the odometer
            if deg == 0:
                break
            q = deg - 1
            while q >= 0:
                ks[q] += 1
                if ks[q] < sizes[slot_types[base + q]]:
                    break
                q -= 1
            if q < 0:
                break
            for r in range(q + 1, deg):
                ks[r] = ks[r - 1] if same_prev[base + r] else 0

    vals = hv_arr[:heap_n].copy()
    orders = ho_arr[:heap_n].copy()
    out_tags = tags_arr[hs_arr[:heap_n]]
    keep = np.lexsort((orders, -vals))
    from ._pykernels import ScanOutput
    return ScanOutput(max_g, n_rows, n_above, vals[keep], out_tags[keep],
                      prices_arr if want_prices else None)


def verify_exact(prob, int64_t[::1] Gx, int64_t[::1] Gy):
    """Exact row check; see ``_pykernels.verify_exact`` for the inequality.

    ``Gx``/``Gy`` hold ``B*D - A*n`` at each cell's left and right end.
    Returns ``(n_rows, first_bad_tag, best_tag)``.
    """
    cdef int64_t[::1] slot_types = prob.slot_types
    cdef int64_t[::1] slot_off = prob.slot_off
    cdef signed char[::1] same_prev = prob.same_prev
    cdef int64_t[::1] sizes = prob.sizes_arr
    cdef int64_t[::1] offset = prob.offset
    cdef int64_t[::1] xoff = prob.xoff
    cdef int64_t[::1] N = prob.N_flat
    cdef int64_t D = prob.D, p = prob.p, q_ = prob.q
    cdef Py_ssize_t t = prob.t

    cdef int64_t ks[MAXDEG]
    cdef int64_t best_ks[MAXDEG]
    cdef int64_t bad_ks[MAXDEG]
    cdef Py_ssize_t i, q, r, deg, d, base, a_, b_, m, k0, lo_k, hi_k
    cdef Py_ssize_t best_i = -1, best_k0 = -1, best_deg = 0, bad_i = -1, bad_k0 = -1, bad_deg = 0
    cdef int64_t ty
    cdef ssm_i128 nx, ny, s, Dd, qDd, qDd1, den_hi, den_lo, slack, best_slack = 0
    cdef bint have_best = False, have_bad = False
    cdef int64_t n_rows = 0

    for i in range(t):
        base = slot_off[i]
        deg = slot_off[i + 1] - base
        d = sizes[i]
        Dd = 1
        for q in range(deg):
            Dd *= D
        qDd = <ssm_i128>q_ * Dd
        qDd1 = qDd * D
        for q in range(deg):
            ks[q] = 0
        while True:
            nx = 1; ny = 1; s = 0
            for q in range(deg):
                ty = slot_types[base + q]
                nx *= N[xoff[ty] + ks[q]]
                ny *= N[xoff[ty] + ks[q] + 1]
                s += Gx[offset[ty] + ks[q]]
            den_hi = qDd + <ssm_i128>p * nx
            den_lo = qDd + <ssm_i128>p * ny
            a_ = 0; b_ = d
            while a_ < b_:
                m = (a_ + b_) // 2
                if <ssm_i128>N[xoff[i] + m + 1] * den_lo >= qDd1:
                    b_ = m
                else:
                    a_ = m + 1
            lo_k = a_
            a_ = -1; b_ = d - 1
            while a_ < b_:
                m = (a_ + b_ + 1) // 2
                if <ssm_i128>N[xoff[i] + m] * den_hi <= qDd1:
                    a_ = m
                else:
                    b_ = m - 1
            hi_k = a_
            for k0 in range(lo_k, hi_k + 1):
                n_rows += 1
                slack = <ssm_i128>Gy[offset[i] + k0] * D - s * (D - N[xoff[i] + k0])
                if slack <= 0 and not have_bad:
                    have_bad = True
                    bad_i = i; bad_k0 = k0; bad_deg = deg
                    for q in range(deg):
                        bad_ks[q] = ks[q]
                if not have_best or slack < best_slack:
                    have_best = True
                    best_slack = slack
                    best_i = i; best_k0 = k0; best_deg = deg
                    for q in range(deg):
                        best_ks[q] = ks[q]
            if deg == 0:
                break
            q = deg - 1
            while q >= 0:
                ks[q] += 1
                if ks[q] < sizes[slot_types[base + q]]:
                    break
                q -= 1
            if q < 0:
                break
            for r in range(q + 1, deg):
                ks[r] = ks[r - 1] if same_prev[base + r] else 0

    bad = None
    best = None
    if have_bad:
        bad = (bad_i, bad_k0, tuple(bad_ks[q] for q in range(bad_deg)))
    if have_best:
        best = (best_i, best_k0, tuple(best_ks[q] for q in range(best_deg)))
    return n_rows, bad, best
