"""Symbolic phase: order, permute, prune and find the level(k) fill."""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import Optional

from .ordering import NdTree, RangeList, load_ordering, nested_dissection, prune_tree
from .sparsecore import CsrMatrix, Permutation, permute_symmetric
from .symbolic import FillPattern, levelk_pattern_bfs


@dataclass
class Problem:
    a: CsrMatrix
    perm: Permutation
    tree: Optional[NdTree]  # None when the ordering was imported
    ranges: RangeList
    a_permuted: CsrMatrix
    fill: FillPattern
    times: dict = field(default_factory=dict)


def prepare(a: CsrMatrix, k: int, leaf_size: int = 32, max_depth: int = 32,
            treecut: int = 0, ordering_path=None, single_range: bool = False) -> Problem:
    if k < 0 or treecut < 0:
        raise ValueError("k and treecut must be >= 0")
    if a.nrows != a.ncols:
        raise ValueError("matrix must be square")
    t0 = time.perf_counter()
    tree = None
    if ordering_path is not None:
        perm, ranges = load_ordering(ordering_path, a.nrows)
    else:
        perm, tree = nested_dissection(a, leaf_size, max_depth)
        ranges = prune_tree(tree, treecut)
    if single_range:
        ranges = RangeList.single(a.nrows)
    a_perm = permute_symmetric(a, perm)
    t1 = time.perf_counter()
    fill = levelk_pattern_bfs(a_perm, k)
    t2 = time.perf_counter()
    return Problem(a, perm, tree, ranges, a_perm, fill,
                   {"ordering": t1 - t0, "symbolic": t2 - t1})
