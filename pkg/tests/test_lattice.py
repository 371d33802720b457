import numpy as np
import pytest
from hypothesis import given, strategies as st

from ssmcert.errors import InvalidParameterError, ResourceLimitError
from ssmcert.lattice import (Direction, Ordering, build_cycle_free_matrix, build_named_machine,
                             enumerate_saw_tree, machine_names, walks_of_machine)


def test_untrimmed_ell4_is_the_classic_matrix():
    M = build_cycle_free_matrix(4)
    assert M.rows.tolist() == [[0, 4, 0, 0], [0, 1, 2, 0], [0, 1, 1, 1], [0, 1, 1, 0]]
    assert M.transient == frozenset({0})


def test_untrimmed_degrees():
    for ell in (4, 6):
        M = build_cycle_free_matrix(ell, minimize=False)
        deg = M.rows.sum(axis=1)
        assert deg[M.root] == 4
        assert all(d <= 3 for i, d in enumerate(deg) if i != M.root)


@pytest.mark.parametrize("ell", [3, 5, 2, 12])
def test_bad_ell_rejected(ell):
    with pytest.raises(InvalidParameterError):
        build_cycle_free_matrix(ell)


def test_state_cap_is_reported():
    with pytest.raises(ResourceLimitError) as err:
        build_cycle_free_matrix(8, trim_boundary=True, max_states=50)
    assert "50" in str(err.value)


def test_trim_needs_homogeneous_ordering():
    with pytest.raises(InvalidParameterError):
        build_cycle_free_matrix(4, trim_boundary=True, ordering=Ordering.random(1))


def test_build_is_deterministic():
    a = build_cycle_free_matrix(6, trim_boundary=True)
    b = build_cycle_free_matrix(6, trim_boundary=True)
    assert a == b and a.labels == b.labels


def test_trimmed_counts_frozen():
    # Window canonicalization without a reflection quotient.
    assert build_cycle_free_matrix(4, trim_boundary=True).t == 49
    assert build_cycle_free_matrix(6, trim_boundary=True).t == 352


def _walk_positions(path):
    pos = [(0, 0)]
    for ch in path:
        dx, dy = Direction[ch].value
        pos.append((pos[-1][0] + dx, pos[-1][1] + dy))
    return pos


@pytest.mark.parametrize("ell", [4, 6])
def test_generated_walks_avoid_short_cycles(ell):
    M = build_cycle_free_matrix(ell, trim_boundary=True)
    for path in walks_of_machine(M, 9):
        pos = _walk_positions(path)
        for i in range(len(pos)):
            for j in range(i + 1, min(len(pos), i + ell + 1)):
                assert pos[i] != pos[j], path


def test_named_machines():
    assert set(machine_names()) == {"D_H", "D_G", "D_prime"}
    dh = build_named_machine("D_H")
    assert dh.core.rows.tolist() == [[1, 1, 1], [1, 1, 0], [1, 0, 1]]
    dg = build_named_machine("D_G")
    assert sorted(dg.core.labels) == sorted(["NN", "NW", "NE", "WW", "EE", "WN", "EN"])
    assert build_named_machine("D_prime").t == 17
    with pytest.raises(InvalidParameterError):
        build_named_machine("nope")


def test_saw_tree_small():
    tree = enumerate_saw_tree(2, 2)
    assert len(tree.children("")) == 4
    assert all(len(tree.children(d)) == 3 for d in "NESW")


def test_saw_tree_depth_bound():
    with pytest.raises(InvalidParameterError):
        enumerate_saw_tree(2, 5)


def test_saw_tree_cap():
    with pytest.raises(ResourceLimitError):
        enumerate_saw_tree(5, 8, max_nodes=100)


def test_dh_contained_in_saw_tree():
    tree = enumerate_saw_tree(5, 8, Ordering("NEWS"))
    assert tree.contains_paths(walks_of_machine(build_named_machine("D_H"), 8))


@pytest.mark.parametrize("seed", [0, 1, 2])
def test_dg_contained_for_random_orderings(seed):
    tree = enumerate_saw_tree(5, 8, Ordering.random(seed))
    assert tree.contains_paths(walks_of_machine(build_named_machine("D_G"), 8))


@given(st.permutations("NESW"))
def test_ordering_permutations_round_trip(perm):
    o = Ordering("".join(perm))
    assert o.permutation == "".join(perm)
    assert sorted(o.rank_at((3, -2)).values()) == [0, 1, 2, 3]
