import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import random_symmetric_pattern
from icbyblocks.ordering import (NdTree, RangeList, load_ordering, nested_dissection, prune_tree,
                                 treecut_for_ranges, write_ordering)
from icbyblocks.sparsecore import CsrMatrix, Permutation, grid_laplacian


def path_graph(n):
    return CsrMatrix.from_dense(2 * np.eye(n) - np.eye(n, k=1) - np.eye(n, k=-1))


def edge_set(a):
    rows = a.row_indices()
    return {(int(i), int(j)) for i, j in zip(rows, a.col_idx) if i != j}


def check_tree(tree: NdTree, perm: Permutation, a: CsrMatrix):
    n = a.nrows
    assert sorted(perm.perm.tolist()) == list(range(n))
    edges = edge_set(a)
    covered = np.zeros(n, dtype=int)
    for node in tree.nodes:
        covered[node.range_begin:node.range_end] += 1
        assert node.span_begin <= node.range_begin <= node.range_end
        if not node.children:
            assert node.span_begin == node.range_begin
            assert node.size > 0
            continue
        # children tile [span_begin, range_begin) in order, then the separator
        spans = [tree.nodes[c].span for c in node.children]
        assert spans[0][0] == node.span_begin
        assert all(e == b for (_, e), (b, _) in zip(spans, spans[1:]))
        assert spans[-1][1] == node.range_begin
        # separator property: no edge between vertex sets of different children
        parts = [set(tree.subtree_vertices(c, perm).tolist()) for c in node.children]
        for p, q in itertools.combinations(parts, 2):
            assert not any((u, v) in edges for u in p for v in q)
    assert np.all(covered == 1)


def test_path_of_seven():
    a = path_graph(7)
    perm, tree = nested_dissection(a, leaf_size=1)
    root = tree.nodes[tree.root]
    assert (root.range_begin, root.range_end) == (6, 7)
    assert perm.iperm[6] == 3
    assert [tree.nodes[c].range_end - tree.nodes[c].span_begin for c in root.children] == [3, 3]
    check_tree(tree, perm, a)
    assert prune_tree(tree, 1).pairs() == [(0, 3), (3, 6), (6, 7)]


def test_prune_extremes():
    a = path_graph(7)
    _, tree = nested_dissection(a, leaf_size=1)
    assert prune_tree(tree, 0).pairs() == [(i, i + 1) for i in range(7)]
    assert prune_tree(tree, tree.height()).pairs() == [(0, 7)]
    assert prune_tree(tree, 100).pairs() == [(0, 7)]


def test_complete_graph():
    a = CsrMatrix.from_dense(np.ones((4, 4)))
    perm, tree = nested_dissection(a, leaf_size=1)
    check_tree(tree, perm, a)


def test_leaf_size_at_least_n_gives_single_leaf():
    a = grid_laplacian(3)
    perm, tree = nested_dissection(a, leaf_size=9)
    assert len(tree.nodes) == 1
    assert perm.perm.tolist() == list(range(9))
    assert prune_tree(tree, 0).pairs() == [(0, 9)]


def test_max_depth_zero():
    _, tree = nested_dissection(grid_laplacian(4), leaf_size=1, max_depth=0)
    assert len(tree.nodes) == 1


def test_disconnected_components_get_empty_separator():
    # two disjoint paths plus an isolated vertex
    d = np.zeros((7, 7))
    for i, j in [(0, 1), (1, 2), (3, 4), (4, 5)]:
        d[i, j] = d[j, i] = -1
    d += 3 * np.eye(7)
    a = CsrMatrix.from_dense(d)
    perm, tree = nested_dissection(a, leaf_size=3)
    root = tree.nodes[tree.root]
    assert root.size == 0 and len(root.children) == 3
    check_tree(tree, perm, a)
    assert prune_tree(tree, 0).pairs() == [(0, 3), (3, 6), (6, 7)]


def test_grid_separator_and_ordering_deterministic():
    a = grid_laplacian(9, 7)
    p1, t1 = nested_dissection(a, leaf_size=2)
    p2, _ = nested_dissection(a, leaf_size=2)
    assert np.array_equal(p1.perm, p2.perm)
    check_tree(t1, p1, a)


@settings(max_examples=60, deadline=None)
@given(n=st.integers(1, 200), density=st.floats(0.0, 0.05), leaf=st.integers(1, 20),
       seed=st.integers(0, 2**32 - 1))
def test_random_graph_invariants(n, density, leaf, seed):
    a = random_symmetric_pattern(n, density, np.random.default_rng(seed))
    perm, tree = nested_dissection(a, leaf_size=leaf)
    check_tree(tree, perm, a)
    for t in range(tree.height() + 2):
        r = prune_tree(tree, t)
        assert r.bounds[0] == 0 and r.bounds[-1] == n
        assert np.all(np.diff(r.bounds) > 0)


def test_treecut_for_ranges_picks_closest():
    _, tree = nested_dissection(grid_laplacian(20), leaf_size=1)
    counts = [len(prune_tree(tree, t)) for t in range(tree.height() + 1)]
    t = treecut_for_ranges(tree, 10)
    assert abs(counts[t] - 10) == min(abs(c - 10) for c in counts)


def write(tmp_path, text):
    p = tmp_path / "ord.txt"
    p.write_text(text)
    return p


def test_load_identity_ordering(tmp_path):
    perm, ranges = load_ordering(write(tmp_path, "3\n0\n1\n2\n1\n0 3\n"), 3)
    assert perm.perm.tolist() == [0, 1, 2]
    assert ranges.pairs() == [(0, 3)]


def test_load_ordering_rejects_duplicate(tmp_path):
    with pytest.raises(ValueError, match="not a bijection"):
        load_ordering(write(tmp_path, "3\n0\n0\n2\n1\n0 3\n"), 3)


def test_load_ordering_rejects_gap(tmp_path):
    with pytest.raises(ValueError, match="ranges not contiguous"):
        load_ordering(write(tmp_path, "3\n0\n1\n2\n2\n0 1\n2 3\n"), 3)


@pytest.mark.parametrize("text", ["", "4\n0\n1\n2\n3\n1\n0 4\n", "3\n0\n1\n", "3\n0\n1\n2\n1\n0\n"])
def test_load_ordering_malformed(tmp_path, text):
    with pytest.raises(ValueError):
        load_ordering(write(tmp_path, text), 3)


def test_ordering_file_round_trip(tmp_path):
    perm, tree = nested_dissection(grid_laplacian(5), leaf_size=2)
    ranges = prune_tree(tree, 1)
    p = tmp_path / "o.txt"
    write_ordering(p, perm, ranges)
    perm2, ranges2 = load_ordering(p, 25)
    assert np.array_equal(perm.perm, perm2.perm)
    assert ranges == ranges2


def test_range_list_validation():
    with pytest.raises(ValueError):
        RangeList([0, 2, 2])
    with pytest.raises(ValueError):
        RangeList.from_pairs([(0, 2), (3, 4)], 4)
    assert RangeList.from_pairs([(0, 2), (2, 4)], 4).block_of().tolist() == [0, 0, 1, 1]
