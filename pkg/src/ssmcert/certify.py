"""Weak spatial mixing certificates and the never-go-South closed form.

A holds-certificate is a box ``[x_L, x_R]`` that the recurrence maps into
itself, plus a positive vector ``v`` showing that the recurrence contracts
on the box in the ``v``-weighted max norm. A fails-certificate is a pair of
disjoint boxes swapped by the recurrence, which forces a period-2 orbit.
Everything that a certificate claims is checked with integers or Fractions.
"""
from dataclasses import dataclass, field
from fractions import Fraction
import math

import numpy as np

from .branching import BranchingMatrix
from .errors import InvalidParameterError
from .exact import format_rational, parse_activity, parse_rational
from .recurrence import DEFAULT_SCALE, Cuboid, GridVector, Recurrence, iterate_until_stable
from .surd import Surd


# ---------------------------------------------------------------- majorant

@dataclass(frozen=True)
class Monomial:
    coefficient: int
    exponents: tuple  # (type, power) pairs, sorted by type

    def evaluate(self, y):
        out = Fraction(self.coefficient)
        for k, e in self.exponents:
            out *= y[k] ** e
        return out

    def evaluate_float(self, y):
        out = float(self.coefficient)
        for k, e in self.exponents:
            out *= y[k] ** e
        return out

    def __str__(self):
        parts = [] if self.coefficient == 1 and self.exponents else [str(self.coefficient)]
        for k, e in self.exponents:
            parts.append(f"x{k + 1}" if e == 1 else f"x{k + 1}^{e}")
        return "*".join(parts)


class JacobianMajorant:
    """Entry-wise bound ``|J_F(u)| <= lambda * A(y)`` for ``u`` in a box with ``F(lower) <= y``.

    ``A(y)[i, j]`` is the partial derivative of row ``i``'s child product in
    ``x_j``, times ``y_i**2`` in place of ``F_i(u)**2``.
    """

    def __init__(self, M):
        core = M.core
        self.t = core.t
        self.entries = {}
        for i in range(core.t):
            row = dict(core.children(i))
            for j, c in row.items():
                exps = dict(row)
                exps[j] = c - 1
                exps[i] = exps.get(i, 0) + 2
                mono = tuple(sorted((k, e) for k, e in exps.items() if e))
                self.entries[(i, j)] = Monomial(c, mono)

    def symbolic(self, i, j):
        m = self.entries.get((i, j))
        return str(m) if m else "0"

    def evaluate(self, y):
        """Exact matrix as a list of rows of Fractions."""
        y = [Fraction(v) for v in y]
        A = [[Fraction(0)] * self.t for _ in range(self.t)]
        for (i, j), m in self.entries.items():
            A[i][j] = m.evaluate(y)
        return A

    def evaluate_float(self, y):
        A = np.zeros((self.t, self.t))
        for (i, j), m in self.entries.items():
            A[i, j] = m.evaluate_float(y)
        return A


def jacobian_majorant(M):
    return JacobianMajorant(M)


def perron_bound(A, v):
    """Collatz-Wielandt bound ``max_i (A v)_i / v_i`` in exact arithmetic."""
    v = [parse_rational(x) if not isinstance(x, Fraction) else x for x in v]
    if any(x <= 0 for x in v):
        raise InvalidParameterError("test vector must be strictly positive")
    if len(A) != len(v):
        raise InvalidParameterError("matrix and vector sizes differ")
    best = Fraction(0)
    for row, vi in zip(A, v):
        s = sum((Fraction(a) * x for a, x in zip(row, v) if a), Fraction(0))
        best = max(best, s / vi)
    return best


def find_test_vector(A, margin=0.01, digits=6, iterations=20000):
    """Approximate Perron vector of a non-negative matrix as short positive rationals.

    Power iteration runs on ``(A + I) / 2`` so that periodic matrices
    converge too. Coordinates are scaled up by ``1 + margin`` and rounded up
    to ``digits`` decimals, never below ``10**-digits``. The result carries no
    claim on its own.
    """
    A = np.asarray([[float(a) for a in row] for row in A], dtype=float)
    t = A.shape[0]
    if t == 0:
        return []
    if not A.any():
        return [Fraction(1)] * t
    B = (A + np.eye(t)) / 2
    v = np.ones(t)
    for _ in range(iterations):
        w = B @ v
        w /= w.max()
        if np.abs(w - v).max() < 1e-14:
            v = w
            break
        v = w
    scale = 10**digits
    v = v / v.max()
    out = []
    for x in v:
        out.append(Fraction(max(1, math.ceil(x * (1 + margin) * scale)), scale))
    return out


# ---------------------------------------------------------------- results

def _matrix_payload(M):
    return M.core.to_dict()


def _matrix_from_payload(d):
    return BranchingMatrix.from_dict(d)


@dataclass(frozen=True)
class CertificationFailure:
    """A certificate could not be produced. This proves nothing either way."""

    kind: str
    check: str
    detail: str
    data: dict = field(default_factory=dict)

    def __bool__(self):
        return False

    def to_dict(self):
        return {"kind": self.kind, "check": self.check, "detail": self.detail, "data": self.data}


@dataclass(frozen=True)
class WsmHoldsCert:
    matrix: BranchingMatrix
    lam: Fraction
    pairs: int
    x_L: GridVector
    x_R: GridVector
    test_vector: tuple
    bound: Fraction

    kind = "wsm-holds"

    def to_dict(self):
        return {
            "matrix": _matrix_payload(self.matrix),
            "lambda": format_rational(self.lam),
            "pairs": self.pairs,
            "scale": self.x_L.scale,
            "x_L": self.x_L.to_strings(),
            "x_R": self.x_R.to_strings(),
            "test_vector": [format_rational(v) for v in self.test_vector],
            "bound": format_rational(self.bound),
            "bound_decimal": f"{float(self.bound):.10f}",
        }

    @classmethod
    def from_dict(cls, d):
        s = int(d["scale"])
        return cls(_matrix_from_payload(d["matrix"]), parse_activity(d["lambda"]), int(d["pairs"]),
                   GridVector.from_strings(d["x_L"], s), GridVector.from_strings(d["x_R"], s),
                   tuple(parse_rational(v) for v in d["test_vector"]), parse_rational(d["bound"]))


@dataclass(frozen=True)
class WsmFailsCert:
    matrix: BranchingMatrix
    lam: Fraction
    left: Cuboid
    right: Cuboid

    kind = "wsm-fails"

    def to_dict(self):
        return {
            "matrix": _matrix_payload(self.matrix),
            "lambda": format_rational(self.lam),
            "scale": self.left.lo.scale,
            "x_LL": self.left.lo.to_strings(),
            "x_LR": self.left.hi.to_strings(),
            "x_RL": self.right.lo.to_strings(),
            "x_RR": self.right.hi.to_strings(),
        }

    @classmethod
    def from_dict(cls, d):
        s = int(d["scale"])
        g = lambda key: GridVector.from_strings(d[key], s)  # noqa: E731
        return cls(_matrix_from_payload(d["matrix"]), parse_activity(d["lambda"]),
                   Cuboid(g("x_LL"), g("x_LR")), Cuboid(g("x_RL"), g("x_RR")))


@dataclass(frozen=True)
class Verification:
    ok: bool
    check: str = ""
    detail: str = ""

    def __bool__(self):
        return self.ok


# ---------------------------------------------------------------- holds

def _contraction_bound(M, lam, x_R, v):
    A = JacobianMajorant(M).evaluate(x_R.to_fractions())
    return lam * perron_bound(A, v)


def wsm_certify(M, lam, N=1000, scale=DEFAULT_SCALE, test_vector=None, max_pairs=None):
    """Try to certify weak spatial mixing of the tree generated by ``M`` at ``lam``.

    ``x_L`` is obtained from the zero vector by at least ``N`` rounded pairs
    (up, then down), continuing until a pair leaves it unchanged or
    ``max_pairs`` is reached; ``x_R = F_up(x_L)``. Returns a
    :class:`WsmHoldsCert` or a :class:`CertificationFailure`.
    """
    lam = parse_activity(lam)
    if N < 0:
        raise InvalidParameterError("N must be >= 0")
    core = M.core
    rec = Recurrence(core, lam)
    max_pairs = max_pairs if max_pairs is not None else max(10 * N, 1000)
    x_L, pairs, _stable = iterate_until_stable(rec, lam, GridVector.zeros(core.t, scale), N,
                                               "up", max_pairs=max_pairs)
    x_R = rec.up(x_L)
    if not x_L <= rec.down(x_R):
        return CertificationFailure("wsm-holds", "invariant-box", "F_down(x_R) is not >= x_L")
    A = JacobianMajorant(core).evaluate_float(x_R.to_floats())
    v = tuple(test_vector) if test_vector is not None else tuple(find_test_vector(A))
    v = tuple(parse_rational(x) if not isinstance(x, Fraction) else x for x in v)
    bound = _contraction_bound(core, lam, x_R, v)
    if bound >= 1:
        return CertificationFailure(
            "wsm-holds", "perron-bound",
            f"lambda * max_i (A v)_i / v_i = {float(bound):.9f} is not < 1",
            {"bound": format_rational(bound), "x_L": x_L.to_strings(), "x_R": x_R.to_strings()})
    return WsmHoldsCert(core, lam, pairs, x_L, x_R, v, bound)


def verify_wsm_holds(cert):
    """Re-check a holds-certificate from scratch."""
    core = cert.matrix.core
    rec = Recurrence(core, cert.lam)
    t = core.t
    s = cert.x_L.scale
    if len(cert.x_L) != t or len(cert.x_R) != t or len(cert.test_vector) != t:
        return Verification(False, "shape", "vector lengths do not match the matrix")
    if cert.pairs < 0:
        return Verification(False, "pairs", "negative pair count")
    x = GridVector.zeros(t, s)
    for _ in range(cert.pairs):
        x = rec.down(rec.up(x))
    if x != cert.x_L:
        return Verification(False, "x_L-replay", "x_L differs from the replayed rounded iteration")
    if not rec.up(cert.x_L) <= cert.x_R:
        return Verification(False, "upper-chain", "F_up(x_L) <= x_R fails")
    if not cert.x_L <= rec.down(cert.x_R):
        return Verification(False, "lower-chain", "x_L <= F_down(x_R) fails")
    if any(v <= 0 for v in cert.test_vector):
        return Verification(False, "test-vector", "test vector must be positive")
    bound = _contraction_bound(core, cert.lam, cert.x_R, cert.test_vector)
    if bound >= 1:
        return Verification(False, "perron-bound", f"bound {float(bound):.9f} is not < 1")
    if bound != cert.bound:
        return Verification(False, "bound-value", "stated bound differs from the recomputed one")
    return Verification(True)


# ---------------------------------------------------------------- fails

def _chain_failures(rec, left, right):
    """The first violated strict inequality of the swap chains, or None."""
    LL, LR, RL, RR = left.lo, left.hi, right.lo, right.hi
    chains = (
        ("x_LL < F_down(x_RR)", LL, rec.down(RR)),
        ("F_down(x_RR) < F_up(x_RL)", rec.down(RR), rec.up(RL)),
        ("F_up(x_RL) < x_LR", rec.up(RL), LR),
        ("x_RL < F_down(x_LR)", RL, rec.down(LR)),
        ("F_down(x_LR) < F_up(x_LL)", rec.down(LR), rec.up(LL)),
        ("F_up(x_LL) < x_RR", rec.up(LL), RR),
    )
    for name, a, b in chains:
        if not a < b:
            return name
    return None


def _check_refutation(core, lam, left, right):
    rec = Recurrence(core, lam)
    if not left.disjoint(right):
        return "disjoint cuboids"
    return _chain_failures(rec, left, right)


def _auto_cuboids(rec, scale, slack, seed_pairs, rounds):
    """Grow a box around the lower period-2 point until F swaps it with its image."""
    t = rec.t
    a, _, _ = iterate_until_stable(rec, None, GridVector.zeros(t, scale), seed_pairs, "up",
                                   max_pairs=2 * seed_pairs)
    left = Cuboid(a.shifted(-slack), a.shifted(slack))
    for _ in range(rounds):
        right = Cuboid(rec.down(left.hi).shifted(-slack), rec.up(left.lo).shifted(slack))
        if not left.disjoint(right):
            return None
        img_lo, img_hi = rec.down(right.hi), rec.up(right.lo)
        if left.lo < img_lo and img_hi < left.hi:
            return left, right
        lo = GridVector(tuple(min(p, q) for p, q in zip(left.lo.numerators,
                                                         img_lo.shifted(-slack).numerators)), scale)
        hi = GridVector(tuple(max(p, q) for p, q in zip(left.hi.numerators,
                                                         img_hi.shifted(slack).numerators)), scale)
        left = Cuboid(lo, hi)
    return None


def wsm_refute(M, lam, seeds=None, slack=20, cuboids=None, scale=DEFAULT_SCALE,
               seed_pairs=10_000, rounds=20_000):
    """Try to certify that weak spatial mixing fails at ``lam``.

    Accepts explicit ``cuboids`` (two :class:`Cuboid`), or ``seeds`` (two
    grid vectors inflated by ``slack`` grid units), or neither, in which case
    seeds come from a long rounded iteration and the lower box is grown
    until the recurrence maps it strictly into the upper one and back.
    """
    lam = parse_activity(lam)
    core = M.core
    rec = Recurrence(core, lam)
    if cuboids is not None:
        left, right = cuboids
    elif seeds is not None:
        lo_seed, hi_seed = seeds
        left = Cuboid(lo_seed.shifted(-slack), lo_seed.shifted(slack))
        right = Cuboid(hi_seed.shifted(-slack), hi_seed.shifted(slack))
    else:
        found = _auto_cuboids(rec, scale, max(1, slack), seed_pairs, rounds)
        if found is None:
            return CertificationFailure("wsm-fails", "auto-seed",
                                        "no swapped pair of boxes found around the iteration")
        left, right = found
    if left.lo.numerators > right.lo.numerators:
        left, right = right, left
    problem = _check_refutation(core, lam, left, right)
    if problem:
        return CertificationFailure("wsm-fails", problem, f"check failed: {problem}")
    return WsmFailsCert(core, lam, left, right)


def verify_wsm_fails(cert):
    problem = _check_refutation(cert.matrix.core, cert.lam, cert.left, cert.right)
    if problem:
        return Verification(False, problem, f"check failed: {problem}")
    return Verification(True)


# ---------------------------------------------------------------- D_H closed form

@dataclass(frozen=True)
class ClosedForm:
    lam: Fraction
    x0: Surd
    y0: Surd
    trace: Surd
    det: Surd
    classification: str

    def to_dict(self):
        return {"lambda": format_rational(self.lam), "x0": self.x0.to_dict(),
                "y0": self.y0.to_dict(), "classification": self.classification}


def dh_closed_form(lam):
    """Fixed point and spectral-radius class of the two-type never-go-South recurrence.

    Works in Q(sqrt(8*lam + 1)). The largest eigenvalue ``tr/2 + sqrt(tr^2/4 - det)``
    is below 1 iff ``tr < 2`` and ``1 - tr + det > 0``, so the comparison is exact.
    """
    lam = parse_activity(lam)
    if lam <= 1:
        raise InvalidParameterError("closed form requires lambda > 1")
    root = Surd.sqrt(8 * lam + 1)
    x0 = (root + (4 * lam - 1)) / (8 * lam)
    y0 = (root - 3) / (2 * (lam - 1))
    # The fixed-point identities, exactly in the field.
    if (x0 * (1 + lam * x0 * y0 * y0)) != 1 or (y0 * (1 + lam * x0 * y0)) != 1:
        raise ArithmeticError("closed-form point is not a fixed point")
    tr = lam * x0 * y0 * y0 * (x0 + 1)
    det = -(lam * lam) * x0**3 * y0**4
    if (tr - 2).sign() >= 0:
        cls = "above_1"
    else:
        s = (1 - tr + det).sign()
        cls = "below_1" if s > 0 else ("equal_1" if s == 0 else "above_1")
    return ClosedForm(lam, x0, y0, tr, det, cls)


# ---------------------------------------------------------------- threshold

@dataclass
class Probe:
    lam: Fraction
    verdict: str  # "holds", "fails" or "undecided"


@dataclass
class ThresholdEstimate:
    lo: Fraction
    hi: Fraction
    lo_certified: bool
    hi_refuted: bool
    probes: list

    @property
    def width(self):
        return self.hi - self.lo

    def contains(self, value):
        return self.lo <= parse_rational(value) <= self.hi

    def to_dict(self):
        return {"lo": format_rational(self.lo), "hi": format_rational(self.hi),
                "lo_certified": self.lo_certified, "hi_refuted": self.hi_refuted,
                "probes": [[format_rational(p.lam), p.verdict] for p in self.probes]}


def probe_wsm(M, lam, N=1000, scale=DEFAULT_SCALE):
    if wsm_certify(M, lam, N, scale):
        return "holds"
    if wsm_refute(M, lam, scale=scale):
        return "fails"
    return "undecided"


def _snap(x, digits=6):
    return Fraction(round(x * 10**digits), 10**digits)


def threshold_estimate(M, lambda_lo, lambda_hi, tol, N=1000, scale=DEFAULT_SCALE, max_probes=40):
    """Bracket the weak spatial mixing threshold by bisection on certificates.

    Each probe tries to certify, then to refute. Undecided probes are never
    assigned a side: bisection continues in the gaps on either side of the
    undecided zone, and the returned interval can stay wider than ``tol``.
    The result is an estimate that assumes a single threshold.
    """
    lo, hi = parse_activity(lambda_lo), parse_activity(lambda_hi)
    tol = parse_rational(tol)
    if lo >= hi:
        raise InvalidParameterError("lambda_lo must be < lambda_hi")
    probes = []
    lo_v = probe_wsm(M, lo, N, scale)
    hi_v = probe_wsm(M, hi, N, scale)
    probes += [Probe(lo, lo_v), Probe(hi, hi_v)]
    undecided = []
    while hi - lo > tol and len(probes) < max_probes:
        inside = [u for u in undecided if lo < u < hi]
        if not inside:
            mid = _snap((lo + hi) / 2)
        else:
            u_lo, u_hi = min(inside), max(inside)
            gap_lo, gap_hi = u_lo - lo, hi - u_hi
            if max(gap_lo, gap_hi) <= tol / 8:
                break
            mid = _snap((lo + u_lo) / 2) if gap_lo >= gap_hi else _snap((u_hi + hi) / 2)
        if not lo < mid < hi:
            break
        verdict = probe_wsm(M, mid, N, scale)
        probes.append(Probe(mid, verdict))
        if verdict == "holds":
            lo, lo_v = mid, verdict
        elif verdict == "fails":
            hi, hi_v = mid, verdict
        else:
            undecided.append(mid)
    return ThresholdEstimate(lo, hi, lo_v == "holds", hi_v == "fails", probes)
