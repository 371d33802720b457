import os
import sys
from fractions import Fraction as Fr
from itertools import product

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from ssmcert.branching import BranchingMatrix
from ssmcert.errors import InvalidParameterError, SolverError
from ssmcert.lp.constraints import (AcceptableTuple, Layout, LpInstance, PositivityTag,
                                    count_acceptable, emit_constraints, enumerate_acceptable,
                                    parse_row_name, row_name, tag_array, tags_from_array)
from ssmcert.lp.generation import (Candidate, pipeline, refine_intervals, rationalize,
                                   solve_with_generation, ssm_threshold_sweep)
from ssmcert.lp.grid import IntervalGrid, grid_for_matrix, make_grid
from ssmcert.lp.mps import read_mps, write_mps
from ssmcert.lp.solvers import (CommandAdapter, HighsAdapter, IncrementalHighsAdapter,
                                default_adapter)
from ssmcert.lp.verify import PiecewisePotential, spot_check, verify_potential
from ssmcert.recurrence import float_fixed_point

REFERENCE_SOLVER = f"{sys.executable} -m ssmcert.lp.solvers {{mps}} {{sol}}"


# -- grids -------------------------------------------------------------------

def test_make_grid_examples():
    assert make_grid(1, 2).points[0] == (Fr(1, 2), Fr(3, 4), Fr(1))
    assert make_grid(3, 1).points[0] == (Fr(1, 4), Fr(1))
    g = make_grid("2.48", 200)
    assert len(g.points[0]) == 201 and g.points[0][0] == Fr(25, 87)
    assert all(isinstance(x, Fr) for x in g.points[0])


def test_grid_validation():
    with pytest.raises(InvalidParameterError):
        make_grid(1, 0)
    with pytest.raises(InvalidParameterError):
        IntervalGrid(Fr(1), ((Fr(1, 2), Fr(1, 2), Fr(1)),))
    with pytest.raises(InvalidParameterError):
        IntervalGrid(Fr(1), ((Fr(1, 3), Fr(1)),))


def test_grid_split_and_round_trip():
    g = make_grid(1, 2, types=2)
    new, parents = g.split([(0, 1)])
    assert new.points[0] == (Fr(1, 2), Fr(3, 4), Fr(7, 8), Fr(1))
    assert parents == [(0, 1, 1), (0, 1)]
    assert IntervalGrid.from_dict(new.to_dict()) == new
    # intervals narrower than twice the minimum width stay whole
    same, _ = g.split([(0, 1)], min_width=Fr(1, 4))
    assert same.points == g.points


# -- enumeration -------------------------------------------------------------------

def _brute_force(M, lam, grid):
    lam = Fr(lam)
    core = M.core
    out = []
    for i in range(core.t):
        slots = core.slots(i)
        P = grid.points[i]
        for ks in product(*(range(len(grid.points[t]) - 1) for t in slots)):
            px = py = Fr(1)
            for t, k in zip(slots, ks):
                px *= grid.points[t][k]
                py *= grid.points[t][k + 1]
            lo, hi = 1 / (1 + lam * py), 1 / (1 + lam * px)
            for k0 in range(len(P) - 1):
                if P[k0] <= hi and lo <= P[k0 + 1]:
                    out.append(AcceptableTuple(i, k0, tuple(ks)))
    return out


def test_single_interval_single_tuple(tri):
    assert list(enumerate_acceptable(tri, "1.3", make_grid("1.3", 1))) == [
        AcceptableTuple(0, 0, (0, 0, 0))]


def test_dh_brute_force(dh):
    grid = grid_for_matrix(dh, 3, 2)
    fast = list(enumerate_acceptable(dh, 3, grid, dedup=False))
    assert sorted(fast) == sorted(_brute_force(dh, 3, grid))


def test_dedup_keeps_sorted_representatives(dh):
    grid = grid_for_matrix(dh, 3, 4)
    full = set(enumerate_acceptable(dh, 3, grid, dedup=False))
    reps = list(enumerate_acceptable(dh, 3, grid))
    canon = set()
    for i, k0, ks in full:
        slots = dh.core.slots(i)
        # sort indices within runs of equal child types
        out, j = [], 0
        while j < len(slots):
            r = j
            while r < len(slots) and slots[r] == slots[j]:
                r += 1
            out.extend(sorted(ks[j:r]))
            j = r
        canon.add(AcceptableTuple(i, k0, tuple(out)))
    assert set(reps) == canon and len(reps) == len(canon)


def test_enumeration_order(dg):
    grid = grid_for_matrix(dg, "2.5", 3)
    tags = list(enumerate_acceptable(dg, "2.5", grid))
    keys = [(t.i, t.ks, t.k0) for t in tags]
    assert keys == sorted(keys)


@st.composite
def small_instances(draw):
    t = draw(st.integers(1, 3))
    rows = np.zeros((t, t), dtype=np.int64)
    for i in range(t):
        for _ in range(draw(st.integers(1, 3))):
            rows[i, draw(st.integers(0, t - 1))] += 1
    M = BranchingMatrix(rows, transient=frozenset())
    lam = draw(st.fractions(min_value=Fr(1, 5), max_value=5, max_denominator=20))
    pts = []
    lo = 1 / (1 + lam)
    for _ in range(t):
        n = draw(st.integers(1, 5))
        raw = draw(st.lists(st.fractions(0, 1, max_denominator=50), max_size=n))
        inner = sorted({lo + x * (1 - lo) for x in raw})
        pts.append(tuple([lo] + [x for x in inner if lo < x < 1] + [Fr(1)]))
    return M, lam, IntervalGrid(lam, tuple(pts))


@settings(max_examples=100)
@given(small_instances())
def test_enumeration_complete_against_brute_force(inst):
    M, lam, grid = inst
    assert sorted(enumerate_acceptable(M, lam, grid, dedup=False)) == sorted(
        _brute_force(M, lam, grid))


# -- rows and instances ------------------------------------------------------------

def test_row_example(tri):
    layout = Layout(tri, make_grid(1, 1))
    coefs, rhs = layout.row(AcceptableTuple(0, 0, (0, 0, 0)))
    assert coefs == {layout.a(0, 0): 0.25, layout.b(0, 0): 0.5, layout.v: -1.0}
    assert rhs == 0.0
    pos, rhs = layout.row(PositivityTag(0, 0))
    assert pos == {layout.a(0, 0): 1.0, layout.b(0, 0): -1.0, layout.v: -1.0} and rhs == 0.0
    floor, rhs = layout.row(PositivityTag(0, 0), positivity_floor=1)
    assert layout.v not in floor and rhs == -1.0


def test_emit_constraints_and_box(tri):
    grid = make_grid("1.5", 3)
    tuples = list(enumerate_acceptable(tri, "1.5", grid))
    inst = emit_constraints(tri, "1.5", grid, tuples, big=1e6)
    assert inst.n_rows == len(tuples) + 3
    assert list(inst.upper[:-1]) == [1e6] * 6 and list(inst.lower[:-1]) == [0.0] * 6
    assert len(inst.box_rows()) == 12
    for r, tag in enumerate(inst.tags):
        coefs, rhs = inst.layout.row(tag)
        dense = np.zeros(inst.layout.n_vars)
        for c, val in coefs.items():
            dense[c] = val
        assert np.allclose(inst.A[r].toarray().ravel(), dense)


def test_vectorized_rows_match_generic(dg):
    grid = grid_for_matrix(dg, "2.7", 4)
    layout = Layout(dg, grid)
    tags = list(enumerate_acceptable(dg, "2.7", grid))
    fast = LpInstance.from_arrays(layout, tag_array(tags, layout), positivity_floor=1.0)
    slow = LpInstance(layout, tags + layout.positivity_tags(), positivity_floor=1.0)
    slow_generic = LpInstance.__new__(LpInstance)
    slow_generic._init_generic(layout, tags + layout.positivity_tags(), 1e6, 1.0)
    assert np.allclose(fast.A.toarray(), slow_generic.A.toarray())
    assert np.allclose(fast.rhs, slow_generic.rhs)
    assert fast.tags == slow.tags
    assert tags_from_array(tag_array(tags, layout), layout.slots) == tags


def test_row_names_round_trip():
    for tag in (AcceptableTuple(3, 1, (0, 2, 2)), PositivityTag(0, 7), AcceptableTuple(0, 0, ())):
        assert parse_row_name(row_name(tag)) == tag
    with pytest.raises(ValueError):
        parse_row_name("X_1")


def test_mps_round_trip(tmp_path, dg):
    grid = grid_for_matrix(dg, "2.7", 3)
    inst = emit_constraints(dg, "2.7", grid, list(enumerate_acceptable(dg, "2.7", grid)))
    path = write_mps(inst, tmp_path / "x.mps")
    model = read_mps(path)
    assert model.row_names == inst.row_names()
    assert model.col_names == inst.var_names()
    assert np.allclose(model.A.toarray(), inst.A.toarray())
    assert np.allclose(model.rhs, inst.rhs)
    assert np.array_equal(model.lower, inst.lower) and np.array_equal(model.upper, inst.upper)
    assert np.array_equal(model.cost, inst.cost)


# -- solvers -----------------------------------------------------------------------

def _small_lp(M, lam, d):
    grid = grid_for_matrix(M, lam, d)
    tags = list(enumerate_acceptable(M, lam, grid))
    return emit_constraints(M, lam, grid, tags, positivity_floor=1.0)


@pytest.mark.parametrize("adapter", [HighsAdapter(), IncrementalHighsAdapter(),
                                     CommandAdapter(REFERENCE_SOLVER)],
                         ids=["highs", "incremental", "command"])
def test_adapters_agree(adapter, dh):
    inst = _small_lp(dh, "2.5", 4)
    ref = HighsAdapter().solve(inst)
    res = adapter.solve(inst)
    assert res.ok and abs(res.objective - ref.objective) < 1e-7


def test_incremental_adapter_extends_and_restarts(dg):
    grid = grid_for_matrix(dg, "2.7", 4)
    layout = Layout(dg, grid)
    rows = tag_array(list(enumerate_acceptable(dg, "2.7", grid)), layout)
    inc = IncrementalHighsAdapter()
    for n in (10, 40, len(rows)):
        inst = LpInstance.from_arrays(layout, rows[:n], positivity_floor=1.0)
        assert abs(inc.solve(inst).objective - HighsAdapter().solve(inst).objective) < 1e-7
    # a different prefix forces a rebuild rather than a stale extension
    inst = LpInstance.from_arrays(layout, rows[5:30], positivity_floor=1.0)
    assert abs(inc.solve(inst).objective - HighsAdapter().solve(inst).objective) < 1e-7


def test_command_adapter_failure_dumps_instance(tmp_path, dh, monkeypatch):
    monkeypatch.setenv("SSMCERT_DUMP_DIR", str(tmp_path))
    inst = _small_lp(dh, "2.5", 2)
    with pytest.raises(SolverError) as err:
        CommandAdapter(f"{sys.executable} -c 'raise SystemExit(3)'").solve(inst)
    assert os.path.dirname(err.value.dump_path) == str(tmp_path)
    assert read_mps(err.value.dump_path).row_names == inst.row_names()


def test_default_adapter_honours_env(monkeypatch):
    monkeypatch.setenv("SSMCERT_LP_SOLVER", REFERENCE_SOLVER)
    assert isinstance(default_adapter(), CommandAdapter)
    monkeypatch.delenv("SSMCERT_LP_SOLVER")
    assert not isinstance(default_adapter(), CommandAdapter)


# -- generation, refinement, verification -------------------------------------------

def test_generation_statuses(tri):
    gen = solve_with_generation(tri, 1, grid_for_matrix(tri, 1, 20))
    assert gen.status == "feasible" and gen.candidate.v < 0 and gen.max_violation < 0
    assert len(gen.active) <= gen.n_acceptable
    # a uniform 20-interval grid is too coarse at 1.6; refinement is needed
    gen = solve_with_generation(tri, "1.6", grid_for_matrix(tri, "1.6", 20))
    assert gen.status == "infeasible" and gen.candidate.v >= 0


def test_generation_through_external_solver(tri):
    gen = solve_with_generation(tri, "1", grid_for_matrix(tri, 1, 20),
                                solver=CommandAdapter(REFERENCE_SOLVER))
    assert gen.status == "feasible"


def test_refinement_leaves_satisfied_grid_alone(tri):
    grid = grid_for_matrix(tri, 1, 20)
    gen = solve_with_generation(tri, 1, grid)
    assert gen.status == "feasible"
    assert refine_intervals(tri, 1, grid, gen.candidate, 5) is grid


def test_refinement_concentrates_near_fixed_point(tri):
    lam = "1.65"
    grid = grid_for_matrix(tri, lam, 4)
    for _ in range(6):
        gen = solve_with_generation(tri, lam, grid)
        if gen.status == "feasible":
            break
        grid = refine_intervals(tri, lam, grid, gen.candidate, 2)
    x_star = float_fixed_point(tri, lam)[0]
    pts = grid.floats(0)
    widths = np.diff(pts)
    narrowest = int(np.argmin(widths))
    assert pts[narrowest] - widths.max() <= x_star <= pts[narrowest + 1] + widths.max()
    assert widths.min() < widths.max()


def test_zero_potential_fails_first_positivity_row(dg):
    grid = grid_for_matrix(dg, "2.5", 3)
    res = verify_potential(dg, "2.5", grid, PiecewisePotential.zero(grid))
    assert not res and res.kind == "positivity" and res.row == "P_0_0"


def test_box_violation(tri):
    grid = make_grid(1, 1)
    res = verify_potential(tri, 1, grid, PiecewisePotential(((2 * 10**6,),), ((3 * 10**6,),)))
    assert not res and res.kind == "box"


def test_pipeline_certifies_below_tree_threshold(tri):
    res = pipeline(tri, "1.6", d=20, budget=60)
    assert res.certified and res.certificate.margin > 0
    cert = res.certificate
    assert verify_potential(tri, "1.6", cert.grid, cert.potential)
    assert spot_check(tri, "1.6", cert.grid, cert.potential, samples=2000) < 1


def test_corrupted_potential_rejected(tri):
    cert = pipeline(tri, "1.2", d=6).certificate
    row = cert.tightest.split("_")
    i, k = int(row[1]), int(row[2])
    bad = cert.potential.perturbed("b", i, k, Fr(-1, 1000))
    assert not verify_potential(tri, "1.2", cert.grid, bad)


@settings(max_examples=100)
@given(st.lists(st.tuples(st.just(0), st.integers(0, 40)), min_size=1, max_size=6))
def test_certificates_survive_interval_splits(marks):
    tri = BranchingMatrix([[3]])
    cert = _cached_cert()
    marks = [(i, k % cert.grid.sizes()[0]) for i, k in marks]
    grid, parents = cert.grid.split(marks)
    again = verify_potential(tri, "1.2", grid, cert.potential.split(parents))
    assert again and again.margin >= cert.margin


_CERT = []


def _cached_cert():
    if not _CERT:
        _CERT.append(pipeline(BranchingMatrix([[3]]), "1.2", d=6).certificate)
    return _CERT[0]


def test_rationalize_is_exact(tri):
    grid = make_grid(1, 2)
    layout = Layout(tri, grid)
    cand = Candidate(np.array([0.1234567891, 0.5]), np.array([1.0, 0.3333333333]), -1.0)
    pot = rationalize(cand, layout)
    assert pot.a[0][0] == Fr(123456789, 10**9) and pot.b[0][1] == Fr(333333333, 10**9)


def test_sweep_above_tree_threshold_is_not_certified(tri):
    rows, best = ssm_threshold_sweep(tri, ["1.7"], budget=10)
    assert best is None
    assert rows[0].status != "certified"
