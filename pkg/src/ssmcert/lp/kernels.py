"""Kernel selection and the flattened problem data both kernels consume.

The compiled module is used when it imports and ``SSMCERT_PURE_PYTHON`` is
not set to ``1``. Exact verification additionally falls back to Python
integers whenever the 128-bit bound for the instance could be exceeded.
"""
import os

import numpy as np

from ..exact import parse_activity
from . import _pykernels

try:
    from . import _ckernels
except ImportError:  # extension not built
    _ckernels = None

_I128_BITS = 126
_I64_BITS = 62


def backend_name():
    return "cython" if _select() is not _pykernels else "python"


def _select(force=None):
    if force == "python":
        return _pykernels
    if force == "cython":
        if _ckernels is None:
            raise ImportError("compiled kernels are not available")
        return _ckernels
    if _ckernels is None or os.environ.get("SSMCERT_PURE_PYTHON") == "1":
        return _pykernels
    return _ckernels


class KernelProblem:
    """Grid and branching data laid out for the scanning and verification loops."""

    def __init__(self, M, lam, grid):
        core = M.core
        if core.t != grid.t:
            raise ValueError(f"grid has {grid.t} types, matrix has {core.t}")
        self.lam = parse_activity(lam)
        self.lam_float = float(self.lam)
        self.p, self.q = self.lam.numerator, self.lam.denominator
        self.t = core.t
        self.slots = [tuple(core.slots(i)) for i in range(self.t)]
        self.sizes = grid.sizes()
        self.sizes_arr = np.array(self.sizes, dtype=np.int64)
        self.offset = np.concatenate([[0], np.cumsum(self.sizes)]).astype(np.int64)
        self.n_cells = int(self.offset[-1])
        self.max_deg = max((len(s) for s in self.slots), default=0)
        self.X = [grid.floats(i) for i in range(self.t)]
        # flattened forms for the compiled loops
        self.xoff = (self.offset[:-1] + np.arange(self.t)).astype(np.int64)
        self.X_flat = np.concatenate(self.X)
        self.slot_off = np.concatenate([[0], np.cumsum([len(s) for s in self.slots])]).astype(np.int64)
        flat = [t for s in self.slots for t in s]
        self.slot_types = np.array(flat, dtype=np.int64)
        same = []
        for s in self.slots:
            same.extend([0] + [int(s[j] == s[j - 1]) for j in range(1, len(s))])
        self.same_prev = np.array(same, dtype=np.int8)
        self.N, self.D = grid.numerators()
        self._N_flat = None

    @property
    def N_flat(self):
        if self._N_flat is None:
            self._N_flat = np.array([n for row in self.N for n in row], dtype=np.int64)
        return self._N_flat

    def fits_int128(self, coef_bound):
        """Whether the compiled exact check is safe for numerators up to ``coef_bound``."""
        D = self.D
        if D.bit_length() > _I64_BITS or max(self.p, self.q).bit_length() > _I64_BITS:
            return False
        g_bound = 2 * coef_bound * D
        if g_bound.bit_length() > _I64_BITS:
            return False
        deg = self.max_deg
        terms = [
            (self.p + self.q) * D ** (deg + 1),
            (deg + 1) * g_bound * D,
        ]
        return all(x.bit_length() <= _I128_BITS for x in terms)


def scan(prob, psi_x, psi_y, threshold, top_k, want_prices=False, price_floor=0.0,
         backend=None):
    impl = _select(backend)
    return impl.scan(prob, np.ascontiguousarray(psi_x, dtype=float),
                     np.ascontiguousarray(psi_y, dtype=float), float(threshold),
                     int(top_k), bool(want_prices), float(price_floor))


def _slack(prob, A, B, tag):
    i, k0, ks = tag
    D = prob.D
    N = prob.N
    off = prob.offset
    s = sum(B[off[t] + k] * D - A[off[t] + k] * N[t][k] for t, k in zip(prob.slots[i], ks))
    c = off[i] + k0
    return (B[c] * D - A[c] * N[i][k0 + 1]) * D - s * (D - N[i][k0])


def verify_exact(prob, A, B, backend=None):
    """Exact check of every contraction row.

    ``A``/``B`` are integer numerators per cell over the grid's common
    denominator. Returns ``(n_rows, first_bad, best)`` as in the Python kernel;
    slacks are in units of ``1/(Q*D**2)`` for coefficient denominator ``Q``.
    """
    A = [int(a) for a in A]
    B = [int(b) for b in B]
    impl = _select(backend)
    bound = max([abs(x) for x in A + B] + [1])
    if impl is _pykernels or not prob.fits_int128(bound):
        return _pykernels.verify_exact(prob, A, B)
    D = prob.D
    off = prob.offset
    Gx = np.empty(prob.n_cells, dtype=np.int64)
    Gy = np.empty(prob.n_cells, dtype=np.int64)
    for i in range(prob.t):
        Ni = prob.N[i]
        for k in range(prob.sizes[i]):
            c = int(off[i]) + k
            Gx[c] = B[c] * D - A[c] * Ni[k]
            Gy[c] = B[c] * D - A[c] * Ni[k + 1]
    n_rows, bad, best = _ckernels.verify_exact(prob, Gx, Gy)
    if best is not None:
        best = (_slack(prob, A, B, best), best)
    return n_rows, bad, best
