"""Level(k) fill pattern of the upper factor.

``levelk_pattern_bfs`` finds, for every row ``i``, the columns ``j > i`` that
are reachable from ``i`` by a path of at most ``k + 1`` edges whose interior
vertices are all numbered below ``i``. Each source is independent, so the
count pass and the fill pass can each be split over sources, with a prefix
sum of the counts in between giving the row pointers.
"""

from __future__ import annotations

from dataclasses import dataclass

import numba
import numpy as np

from .sparsecore import INDEX, CsrMatrix


@dataclass
class FillPattern:
    pattern: CsrMatrix
    level_cap: int
    # nnz of triu(A) on the same permuted matrix, for fill ratios
    base_nnz: int

    @property
    def nnz(self) -> int:
        return self.pattern.nnz

    @property
    def n(self) -> int:
        return self.pattern.nrows

    def contains(self, i: int, j: int) -> bool:
        cols, _ = self.pattern.row(i)
        pos = np.searchsorted(cols, j)
        return bool(pos < len(cols) and cols[pos] == j)


def _upper_count(a: CsrMatrix) -> int:
    return int(np.count_nonzero(a.col_idx >= a.row_indices()))


@numba.njit(cache=True)
def _fill_path_search(row_ptr, col_idx, n, k, out_cols, count_only, counts, out_ptr):
    # marker[v] == i + 1 means v was already reached from source i
    marker = np.zeros(n, dtype=np.int64)
    dist = np.zeros(n, dtype=np.int64)
    queue = np.empty(n, dtype=np.int64)
    maxlen = k + 1
    for i in range(n):
        stamp = i + 1
        marker[i] = stamp
        dist[i] = 0
        head = 0
        tail = 0
        queue[tail] = i
        tail += 1
        found = 1  # the diagonal
        if not count_only:
            pos = out_ptr[i]
            out_cols[pos] = i
            pos += 1
        while head < tail:
            v = queue[head]
            head += 1
            dv = dist[v]
            for p in range(row_ptr[v], row_ptr[v + 1]):
                w = col_idx[p]
                if marker[w] == stamp:
                    continue
                marker[w] = stamp
                if w > i:
                    found += 1
                    if not count_only:
                        out_cols[pos] = w
                        pos += 1
                else:
                    dist[w] = dv + 1
                    if dv + 1 < maxlen:
                        queue[tail] = w
                        tail += 1
        if count_only:
            counts[i] = found
        else:
            out_cols[out_ptr[i]:out_ptr[i] + found].sort()


def levelk_pattern_bfs(a_permuted: CsrMatrix, k: int) -> FillPattern:
    if k < 0:
        raise ValueError("fill level k must be >= 0")
    n = a_permuted.nrows
    base_nnz = _upper_count(a_permuted)
    rp, ci = a_permuted.row_ptr, a_permuted.col_idx
    counts = np.zeros(n, dtype=INDEX)
    dummy = np.zeros(1, dtype=INDEX)
    _fill_path_search(rp, ci, n, k, dummy, True, counts, dummy)
    row_ptr = np.zeros(n + 1, dtype=INDEX)
    np.cumsum(counts, out=row_ptr[1:])
    cols = np.empty(row_ptr[-1], dtype=INDEX)
    _fill_path_search(rp, ci, n, k, cols, False, counts, row_ptr)
    pattern = CsrMatrix(n, n, row_ptr, cols, np.ones(len(cols)))
    return FillPattern(pattern, k, base_nnz)


def levelk_pattern_oracle(a_permuted: CsrMatrix, k: int) -> FillPattern:
    """Dense level table updated pivot by pivot; O(n^3), small n only."""
    n = a_permuted.nrows
    base_nnz = _upper_count(a_permuted)
    lev = np.full((n, n), np.inf)
    rows = a_permuted.row_indices()
    lev[rows, a_permuted.col_idx] = 0.0
    lev[a_permuted.col_idx, rows] = 0.0
    lev[np.arange(n), np.arange(n)] = 0.0
    for p in range(n - 1):
        lp = lev[p, p + 1:]
        cand = lp[:, None] + lp[None, :] + 1.0
        np.minimum(lev[p + 1:, p + 1:], cand, out=lev[p + 1:, p + 1:])
    keep = np.triu(lev <= k)
    r, c = np.nonzero(keep)
    row_ptr = np.zeros(n + 1, dtype=INDEX)
    np.cumsum(np.bincount(r, minlength=n), out=row_ptr[1:])
    pattern = CsrMatrix(n, n, row_ptr, c, np.ones(len(c)))
    return FillPattern(pattern, k, base_nnz)


def fill_stats(fp: FillPattern) -> dict:
    return {
        "nnz_u": fp.nnz,
        "fill_ratio": fp.nnz / fp.base_nnz if fp.base_nnz else float("nan"),
    }
