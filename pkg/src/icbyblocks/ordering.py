"""Nested-dissection ordering, range trees and tree pruning.

The bisection is a level-structure split: BFS levels are grown from a
pseudo-peripheral vertex, the level holding the median vertex becomes the
separator candidate, and only those of its vertices that touch the next
level are kept in the separator. The rest of that level joins the left part.
Disconnected subgraphs get a parent with an empty separator and one child
per connected component.
"""

from __future__ import annotations

import os
import sys
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy.sparse import csgraph

from .sparsecore import INDEX, CsrMatrix, Permutation


@dataclass
class NdNode:
    # own separator (or leaf) range in the permuted numbering
    range_begin: int
    range_end: int
    # first index of the whole subtree; children occupy [span_begin, range_begin)
    span_begin: int
    depth: int
    children: list[int] = field(default_factory=list)
    parent: int = -1

    @property
    def size(self) -> int:
        return self.range_end - self.range_begin

    @property
    def span(self) -> tuple[int, int]:
        return (self.span_begin, self.range_end)


@dataclass
class NdTree:
    nodes: list[NdNode]
    root: int

    @property
    def n(self) -> int:
        if not self.nodes:
            return 0
        return self.nodes[self.root].range_end

    def heights(self) -> list[int]:
        """Distance from each node down to its deepest leaf."""
        h = [0] * len(self.nodes)
        # children are always created before their parent
        for idx, node in enumerate(self.nodes):
            if node.children:
                h[idx] = 1 + max(h[c] for c in node.children)
        return h

    def height(self) -> int:
        return self.heights()[self.root] if self.nodes else 0

    def subtree_vertices(self, idx: int, perm: Permutation) -> np.ndarray:
        """Original vertex ids of a node's whole subtree."""
        b, e = self.nodes[idx].span
        return perm.iperm[b:e]


class RangeList:
    """Contiguous tiling of ``[0, n)`` stored as ``r + 1`` boundaries."""

    def __init__(self, bounds):
        bounds = np.asarray(bounds, dtype=INDEX)
        if bounds.ndim != 1 or len(bounds) < 1 or bounds[0] != 0:
            raise ValueError("ranges must start at 0")
        if np.any(np.diff(bounds) <= 0):
            raise ValueError("ranges not contiguous or empty")
        self.bounds = bounds

    @classmethod
    def from_pairs(cls, pairs, n: int) -> "RangeList":
        pairs = [(int(b), int(e)) for b, e in pairs]
        if n == 0 and not pairs:
            return cls([0])
        if not pairs or pairs[0][0] != 0 or pairs[-1][1] != n:
            raise ValueError("ranges not contiguous: they must cover [0, n)")
        for (b0, e0), (b1, e1) in zip(pairs, pairs[1:]):
            if e0 != b1:
                raise ValueError("ranges not contiguous")
        if any(e <= b for b, e in pairs):
            raise ValueError("ranges not contiguous: empty range")
        return cls([0] + [e for _, e in pairs])

    @classmethod
    def single(cls, n: int) -> "RangeList":
        return cls([0, n]) if n else cls([0])

    @property
    def n(self) -> int:
        return int(self.bounds[-1])

    def __len__(self) -> int:
        return len(self.bounds) - 1

    def __iter__(self):
        return iter(self.pairs())

    def __getitem__(self, i: int) -> tuple[int, int]:
        return int(self.bounds[i]), int(self.bounds[i + 1])

    def __eq__(self, other) -> bool:
        return isinstance(other, RangeList) and np.array_equal(self.bounds, other.bounds)

    def __repr__(self) -> str:
        return f"RangeList({self.pairs()})"

    def pairs(self) -> list[tuple[int, int]]:
        b = self.bounds.tolist()
        return list(zip(b[:-1], b[1:]))

    def block_of(self) -> np.ndarray:
        """Range id of every index in ``[0, n)``."""
        return np.repeat(np.arange(len(self), dtype=INDEX), np.diff(self.bounds))


def _bfs_levels(graph: sp.csr_matrix, start: int) -> np.ndarray:
    dist = csgraph.shortest_path(graph, method="D", unweighted=True,
                                 directed=False, indices=start)
    return dist.astype(INDEX)


def pseudo_peripheral(graph: sp.csr_matrix, start: int = 0) -> tuple[int, np.ndarray]:
    """George-Liu search; returns the vertex and its BFS levels."""
    degree = np.diff(graph.indptr)
    v, levels = start, _bfs_levels(graph, start)
    while True:
        ecc = levels.max()
        last = np.flatnonzero(levels == ecc)
        u = int(last[np.argmin(degree[last])])
        u_levels = _bfs_levels(graph, u)
        if u_levels.max() <= ecc:
            return v, levels
        v, levels = u, u_levels


def bisect(graph: sp.csr_matrix) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Split a connected graph into (left, right, separator) local vertex ids."""
    _, levels = pseudo_peripheral(graph)
    nlev = int(levels.max())
    n = graph.shape[0]
    counts = np.bincount(levels, minlength=nlev + 1)
    median = int(np.searchsorted(np.cumsum(counts), (n - 1) // 2 + 1))
    median = min(median, nlev - 1)
    in_median = levels == median
    nxt = levels == median + 1
    touches_next = (graph @ nxt.astype(np.float64)) > 0
    sep = in_median & touches_next
    left = (levels < median) | (in_median & ~touches_next)
    right = levels > median
    return np.flatnonzero(left), np.flatnonzero(right), np.flatnonzero(sep)


def _adjacency(a: CsrMatrix) -> sp.csr_matrix:
    """Symmetrized off-diagonal pattern as a 0/1 matrix."""
    rows = a.row_indices()
    off = rows != a.col_idx
    r, c = rows[off], a.col_idx[off]
    g = sp.coo_matrix((np.ones(2 * len(r)), (np.concatenate([r, c]), np.concatenate([c, r]))),
                      shape=a.shape).tocsr()
    g.data[:] = 1.0
    g.sort_indices()
    return g


def nested_dissection(a: CsrMatrix, leaf_size: int = 32,
                      max_depth: int = 32) -> tuple[Permutation, NdTree]:
    if leaf_size < 1:
        raise ValueError("leaf_size must be >= 1")
    if max_depth < 0:
        raise ValueError("max_depth must be >= 0")
    n = a.nrows
    graph = _adjacency(a)
    nodes: list[NdNode] = []
    iperm = np.empty(n, dtype=INDEX)
    cursor = 0

    def place(vertices: np.ndarray) -> tuple[int, int]:
        nonlocal cursor
        begin = cursor
        iperm[begin:begin + len(vertices)] = np.sort(vertices)
        cursor += len(vertices)
        return begin, cursor

    def build(vertices: np.ndarray, depth: int) -> int:
        span_begin = cursor
        if len(vertices) <= leaf_size or depth >= max_depth:
            b, e = place(vertices)
            nodes.append(NdNode(b, e, span_begin, depth))
            return len(nodes) - 1
        sub = graph[vertices][:, vertices]
        ncomp, labels = csgraph.connected_components(sub, directed=False)
        if ncomp > 1:
            # components ordered by their lowest original vertex
            parts = [vertices[labels == c] for c in range(ncomp)]
            parts.sort(key=lambda p: p.min())
            sep = vertices[:0]
        else:
            left, right, sep_local = bisect(sub)
            parts = [vertices[left], vertices[right]]
            sep = vertices[sep_local]
        children = [build(p, depth + 1) for p in parts if len(p)]
        b, e = place(sep)
        nodes.append(NdNode(b, e, span_begin, depth, children))
        me = len(nodes) - 1
        for c in children:
            nodes[c].parent = me
        return me

    if n == 0:
        return Permutation.identity(0), NdTree([NdNode(0, 0, 0, 0)], 0)
    # recursion depth is bounded by min(max_depth, n)
    limit = sys.getrecursionlimit()
    sys.setrecursionlimit(max(limit, min(max_depth, n) + 200))
    try:
        root = build(np.arange(n, dtype=INDEX), 0)
    finally:
        sys.setrecursionlimit(limit)
    return Permutation.from_iperm(iperm), NdTree(nodes, root)


def prune_tree(tree: NdTree, t: int) -> RangeList:
    """Fuse every maximal subtree of height <= t into one range.

    Nodes above the cut contribute their own separator range; empty
    separators are dropped.
    """
    if t < 0:
        raise ValueError("prune level must be >= 0")
    heights = tree.heights()
    pairs = []
    stack = [tree.root]
    while stack:
        idx = stack.pop()
        node = tree.nodes[idx]
        if heights[idx] <= t:
            if node.range_end > node.span_begin:
                pairs.append((node.span_begin, node.range_end))
            continue
        if node.size:
            pairs.append((node.range_begin, node.range_end))
        stack.extend(node.children)
    pairs.sort()
    return RangeList.from_pairs(pairs, tree.n)


def treecut_for_ranges(tree: NdTree, target: int) -> int:
    """Prune level whose range count is closest to ``target`` (ties: smaller t)."""
    best_t, best_gap = 0, None
    for t in range(tree.height() + 1):
        gap = abs(len(prune_tree(tree, t)) - target)
        if best_gap is None or gap < best_gap:
            best_t, best_gap = t, gap
    return best_t


def load_ordering(path, n: int) -> tuple[Permutation, RangeList]:
    """Read ``n``, ``n`` perm values (new index of each old index), ``r`` and
    ``r`` lines of ``begin end``."""
    with open(os.fspath(path), encoding="ascii") as fh:
        tokens = [line.split() for line in fh if line.strip() and not line.startswith("#")]
    try:
        size = int(tokens[0][0])
        if size != n:
            raise ValueError(f"ordering is for n={size}, matrix has n={n}")
        perm_vals = [int(t[0]) for t in tokens[1:1 + size]]
        if len(perm_vals) != size:
            raise ValueError("truncated permutation")
        r = int(tokens[1 + size][0])
        range_lines = tokens[2 + size:2 + size + r]
        if len(range_lines) != r or any(len(t) != 2 for t in range_lines):
            raise ValueError("malformed range list")
        pairs = [(int(b), int(e)) for b, e in range_lines]
        if len(tokens) != 2 + size + r:
            raise ValueError("trailing data after range list")
    except (IndexError, ValueError) as exc:
        raise ValueError(f"{path}: malformed ordering file: {exc}") from exc
    perm = Permutation.from_perm(perm_vals)
    return perm, RangeList.from_pairs(pairs, n)


def write_ordering(path, perm: Permutation, ranges: RangeList) -> None:
    with open(os.fspath(path), "w", encoding="ascii") as fh:
        fh.write(f"{len(perm)}\n")
        fh.writelines(f"{v}\n" for v in perm.perm.tolist())
        fh.write(f"{len(ranges)}\n")
        fh.writelines(f"{b} {e}\n" for b, e in ranges.pairs())
