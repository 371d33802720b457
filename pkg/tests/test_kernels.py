"""Compiled and pure-Python kernels must agree row for row."""
import os
import subprocess
import sys

import numpy as np
import pytest
from hypothesis import given, strategies as st

from ssmcert.branching import BranchingMatrix
from ssmcert.lp import kernels
from ssmcert.lp.grid import grid_for_matrix

needs_compiled = pytest.mark.skipif(kernels._ckernels is None,
                                    reason="compiled kernels not built")

MATRICES = [
    [[3]],
    [[2, 1], [1, 2]],
    [[0, 3], [2, 0]],
    [[1, 1, 0], [0, 2, 1], [1, 0, 1]],
]


@st.composite
def instances(draw):
    rows = draw(st.sampled_from(MATRICES))
    lam = draw(st.sampled_from(["0.8", "1.3", "2.1"]))
    d = draw(st.integers(2, 7))
    M = BranchingMatrix(rows)
    prob = kernels.KernelProblem(M, lam, grid_for_matrix(M, lam, d))
    seed = draw(st.integers(0, 2**32 - 1))
    return prob, np.random.default_rng(seed)


def _assert_scans_equal(a, b):
    assert a.n_rows == b.n_rows
    assert a.n_above == b.n_above
    assert a.max_g == pytest.approx(b.max_g, rel=1e-12, abs=1e-12)
    np.testing.assert_allclose(a.values, b.values, rtol=1e-12, atol=1e-12)
    np.testing.assert_array_equal(a.tags, b.tags)
    if a.prices is not None:
        np.testing.assert_allclose(a.prices, b.prices, rtol=1e-9, atol=1e-9)


@needs_compiled
@given(instances(), st.integers(1, 40), st.booleans())
def test_scan_agrees(inst, top_k, prices):
    prob, rng = inst
    psi_x = rng.uniform(-1, 1, prob.n_cells)
    psi_y = rng.uniform(-1, 1, prob.n_cells)
    thr = float(rng.uniform(-0.5, 0.5))
    py = kernels.scan(prob, psi_x, psi_y, thr, top_k, prices, 0.1, backend="python")
    cy = kernels.scan(prob, psi_x, psi_y, thr, top_k, prices, 0.1, backend="cython")
    _assert_scans_equal(py, cy)


@needs_compiled
@given(instances(), st.integers(1, 10**6))
def test_exact_verification_agrees(inst, scale):
    prob, rng = inst
    A = [int(x) for x in rng.integers(-scale, scale + 1, prob.n_cells)]
    B = [int(x) for x in rng.integers(-scale, scale + 1, prob.n_cells)]
    py = kernels.verify_exact(prob, A, B, backend="python")
    cy = kernels.verify_exact(prob, A, B, backend="cython")
    assert py[0] == cy[0]
    assert py[1] == cy[1]
    assert py[2][0] == cy[2][0]


def test_huge_coefficients_use_python_integers():
    M = BranchingMatrix([[3]])
    prob = kernels.KernelProblem(M, "1.2", grid_for_matrix(M, "1.2", 4))
    big = 10**40
    A = [big] * prob.n_cells
    B = [-big] * prob.n_cells
    assert not prob.fits_int128(big)
    n, bad, best = kernels.verify_exact(prob, A, B)
    assert n > 0 and bad is not None and best[0] < 0


def test_backend_selection():
    name = kernels.backend_name()
    assert name == ("cython" if kernels._ckernels is not None else "python")
    code = "from ssmcert.lp.kernels import backend_name; print(backend_name())"
    env = dict(os.environ, SSMCERT_PURE_PYTHON="1")
    out = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True,
                         text=True, check=True)
    assert out.stdout.strip() == "python"
    with pytest.raises(ValueError):
        kernels.KernelProblem(BranchingMatrix([[1, 1], [1, 1]]), "1",
                              grid_for_matrix(BranchingMatrix([[2]]), "1", 3))
