"""Time the compiled kernels against the pure-Python ones.

    python benchmarks/bench_kernels.py [--repeat 3] [--d 40]

Both backends scan the same acceptable rows at a random candidate and run the
exact integer check on a random rational potential. Results are checked to
agree before timings are printed.
"""
import argparse
import time

import numpy as np

from ssmcert.branching import BranchingMatrix
from ssmcert.lattice import build_cycle_free_matrix
from ssmcert.lp import kernels
from ssmcert.lp.grid import grid_for_matrix


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        times.append(time.perf_counter() - t0)
    return min(times), out


def run_case(name, M, lam, d, repeat, rng):
    prob = kernels.KernelProblem(M, lam, grid_for_matrix(M, lam, d))
    psi_x = rng.uniform(-1, 1, prob.n_cells)
    psi_y = rng.uniform(-1, 1, prob.n_cells)
    A = [int(x) for x in rng.integers(-10**6, 10**6, prob.n_cells)]
    B = [int(x) for x in rng.integers(-10**6, 10**6, prob.n_cells)]
    rows = []
    for label, call in (
        ("scan", lambda b: kernels.scan(prob, psi_x, psi_y, 0.0, 1000, True, 0.0, backend=b)),
        ("verify", lambda b: kernels.verify_exact(prob, A, B, backend=b)),
    ):
        t_py, r_py = best_of(lambda: call("python"), repeat)
        t_cy, r_cy = best_of(lambda: call("cython"), repeat)
        n_py = r_py.n_rows if label == "scan" else r_py[0]
        n_cy = r_cy.n_rows if label == "scan" else r_cy[0]
        assert n_py == n_cy, f"{name} {label}: row counts differ"
        rows.append((name, label, n_py, t_py, t_cy))
    return rows


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--d", type=int, default=40, help="intervals per type")
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args(argv)
    if kernels._ckernels is None:
        raise SystemExit("compiled kernels are not built; run pip install -e . first")
    rng = np.random.default_rng(args.seed)
    cases = [
        ("[[3]] @1.6", BranchingMatrix([[3]]), "1.6"),
        ("M_4 @2.31", build_cycle_free_matrix(4, trim_boundary=True, minimize=True), "2.31"),
        ("M_6 @2.33", build_cycle_free_matrix(6, trim_boundary=True, minimize=True), "2.33"),
    ]
    print(f"{'case':<12} {'kernel':<7} {'rows':>10} {'python s':>10} {'cython s':>10} {'speedup':>8}")
    for name, M, lam in cases:
        for case, label, n, t_py, t_cy in run_case(name, M, lam, args.d, args.repeat, rng):
            print(f"{case:<12} {label:<7} {n:>10} {t_py:>10.4f} {t_cy:>10.4f} {t_py / t_cy:>7.1f}x")


if __name__ == "__main__":
    main()
