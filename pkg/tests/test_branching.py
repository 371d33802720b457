import numpy as np
import pytest
from hypothesis import given, strategies as st

from ssmcert.branching import (BranchingMatrix, Partition, auto_reduce, check_consistent, compose,
                               propose_partition, reduce, refine_to_consistent,
                               same_generated_trees)
from ssmcert.errors import InconsistentPartitionError, InvalidParameterError
from ssmcert.lattice import build_cycle_free_matrix, build_named_machine, named_partition


def _core(name):
    return build_named_machine(name).core


def test_dh_partitions():
    M = _core("D_H")  # types N, E, W
    assert check_consistent(M, Partition(((0,), (1, 2)), 3))
    bad = check_consistent(M, Partition(((0, 1), (2,)), 3))
    assert not bad
    assert bad.violation.block == 0
    assert set(bad.violation.sums) == {0, 1}


def test_discrete_partition_always_consistent():
    M = build_cycle_free_matrix(6, trim_boundary=True)
    assert check_consistent(M, Partition.discrete(M.t))


def test_reductions_from_named_partitions():
    expected = {
        "D_H": [[1, 2], [1, 1]],
        "D_G": [[1, 2, 0], [0, 1, 1], [1, 1, 0]],
        "D_prime": [[0, 2, 1, 0, 0, 0, 0, 0], [1, 1, 0, 0, 0, 0, 0, 0],
                    [0, 0, 1, 2, 0, 0, 0, 0], [1, 0, 0, 0, 1, 0, 0, 0],
                    [1, 1, 0, 0, 0, 1, 0, 0], [0, 0, 0, 0, 0, 0, 1, 0],
                    [0, 0, 0, 0, 0, 0, 0, 1], [0, 1, 0, 0, 0, 0, 0, 0]],
    }
    for name, rows in expected.items():
        M = build_named_machine(name)
        assert reduce(M, named_partition(M)).reduced.rows.tolist() == rows


def test_reduce_rejects_inconsistent():
    M = _core("D_H")
    with pytest.raises(InconsistentPartitionError):
        reduce(M, Partition(((0, 1), (2,)), 3))


def test_malformed_partitions():
    with pytest.raises(InvalidParameterError):
        Partition(((0, 1), (1,)), 2)
    with pytest.raises(InvalidParameterError):
        Partition(((0,),), 2)
    with pytest.raises(InvalidParameterError):
        Partition(((0,), ()), 1)


def test_propose_partition_dh():
    P = propose_partition(_core("D_H"), 3, 1000, 1e-9)
    assert sorted(P.blocks) == [(0,), (1, 2)]


def test_idempotent_on_reduced():
    R = reduce(_core("D_G"), named_partition(build_named_machine("D_G"))).reduced
    again = reduce(R, Partition.discrete(R.t)).reduced
    assert again.rows.tolist() == R.rows.tolist()


def test_composition_matches_direct_reduction():
    M = build_cycle_free_matrix(6, trim_boundary=True)
    first = auto_reduce(M)
    second = reduce(first.reduced, refine_to_consistent(first.reduced))
    composed = compose(first.partition, second.partition)
    assert check_consistent(M, composed)
    assert reduce(M, composed).reduced.rows.tolist() == second.reduced.rows.tolist()


@pytest.mark.parametrize("ell", [4, 6])
def test_reductions_keep_trees(ell):
    M = build_cycle_free_matrix(ell, trim_boundary=True)
    for red in (auto_reduce(M), reduce(M, refine_to_consistent(M))):
        assert check_consistent(M, red.partition)
        assert same_generated_trees(M, red, depth=6)


def test_coarsest_reduction_sizes():
    # Frozen from our canonicalization (window types, transient types kept).
    M6 = build_cycle_free_matrix(6, trim_boundary=True)
    assert reduce(M6, refine_to_consistent(M6)).reduced.t == 34
    assert auto_reduce(build_cycle_free_matrix(4, trim_boundary=True)).reduced.t == 17


def test_json_round_trips():
    M = build_named_machine("D_G")
    assert BranchingMatrix.from_dict(M.to_dict()) == M
    P = named_partition(M)
    assert Partition.from_json(P.to_json(), P.t) == P


@st.composite
def matrix_with_partition(draw):
    """Random matrix built from a random quotient, so the partition is consistent."""
    k = draw(st.integers(1, 4))
    sizes = draw(st.lists(st.integers(1, 3), min_size=k, max_size=k))
    Q = draw(st.lists(st.lists(st.integers(0, 2), min_size=k, max_size=k), min_size=k, max_size=k))
    block_of = [b for b, n in enumerate(sizes) for _ in range(n)]
    t = len(block_of)
    rows = np.zeros((t, t), dtype=np.int64)
    for s in range(t):
        for b in range(k):
            members = [j for j in range(t) if block_of[j] == b]
            for _ in range(Q[block_of[s]][b]):
                rows[s, draw(st.sampled_from(members))] += 1
    return BranchingMatrix(rows, transient=frozenset()), Partition.from_labels(block_of), Q


@given(matrix_with_partition())
def test_random_quotients_reduce_to_their_quotient(data):
    M, P, Q = data
    assert check_consistent(M, P)
    red = reduce(M, P)
    assert red.reduced.rows.tolist() == Q
    # re-expanding along the type map reproduces the block sums of every row
    for s in range(M.t):
        for b, block in enumerate(P.blocks):
            assert M.rows[s, list(block)].sum() == red.reduced.rows[red.type_map[s], b]


@given(matrix_with_partition())
def test_refinement_is_consistent_and_coarser(data):
    M, P, _ = data
    C = refine_to_consistent(M)
    assert check_consistent(M, C)
    assert len(C) <= len(P)
