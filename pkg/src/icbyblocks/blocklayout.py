"""2D sparse partitioned-block matrix made of views over one base CSR factor.

A view never copies values. For each of its rows it stores the absolute
``[lo, hi)`` offsets of the base row segment whose columns fall inside the
view, so kernels walk base arrays directly.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Iterator, Optional

import numpy as np

from .ordering import RangeList
from .sparsecore import INDEX, CsrMatrix


@dataclass(frozen=True)
class CrsRowView:
    local_row: int
    begin: int
    end: int

    def __len__(self) -> int:
        return self.end - self.begin


@dataclass(eq=False)
class MatrixView:
    base: CsrMatrix
    row_begin: int
    col_begin: int
    nrows: int
    ncols: int
    row_lo: np.ndarray
    row_hi: np.ndarray

    def __post_init__(self):
        if (self.row_begin < 0 or self.col_begin < 0
                or self.row_begin + self.nrows > self.base.nrows
                or self.col_begin + self.ncols > self.base.ncols):
            raise ValueError("view rectangle exceeds the base matrix")

    @classmethod
    def over(cls, base: CsrMatrix, row_begin: int, col_begin: int,
             nrows: int, ncols: int) -> "MatrixView":
        """View with offsets found by binary search on each base row."""
        if row_begin + nrows > base.nrows or col_begin + ncols > base.ncols:
            raise ValueError("view rectangle exceeds the base matrix")
        lo = np.empty(nrows, dtype=INDEX)
        hi = np.empty(nrows, dtype=INDEX)
        for lr in range(nrows):
            r = row_begin + lr
            start, stop = base.row_ptr[r], base.row_ptr[r + 1]
            cols = base.col_idx[start:stop]
            lo[lr] = start + np.searchsorted(cols, col_begin, "left")
            hi[lr] = start + np.searchsorted(cols, col_begin + ncols, "left")
        return cls(base, row_begin, col_begin, nrows, ncols, lo, hi)

    @property
    def nnz(self) -> int:
        return int((self.row_hi - self.row_lo).sum())

    @property
    def is_diagonal(self) -> bool:
        return self.row_begin == self.col_begin and self.nrows == self.ncols

    def row_view(self, local_row: int) -> CrsRowView:
        return row_view(self, local_row)

    def entries(self) -> Iterator[tuple[int, int, float]]:
        """Global (row, col, value) triples inside the view."""
        for lr in range(self.nrows):
            for p in range(self.row_lo[lr], self.row_hi[lr]):
                yield self.row_begin + lr, int(self.base.col_idx[p]), float(self.base.values[p])

    def todense(self) -> np.ndarray:
        out = np.zeros((self.nrows, self.ncols))
        for r, c, v in self.entries():
            out[r - self.row_begin, c - self.col_begin] = v
        return out


@dataclass(eq=False)
class TaskView(MatrixView):
    # future of the last task generated that writes this block
    future: Optional[Any] = field(default=None)


def row_view(v: MatrixView, local_row: int) -> CrsRowView:
    if not 0 <= local_row < v.nrows:
        raise IndexError(f"row {local_row} outside view with {v.nrows} rows")
    return CrsRowView(local_row, int(v.row_lo[local_row]), int(v.row_hi[local_row]))


@dataclass(eq=False)
class BlockMatrix:
    """CSR of blocks; block row ``i`` holds ``(j, TaskView)`` with ``j >= i``."""

    base: CsrMatrix
    ranges: RangeList
    block_ptr: np.ndarray
    block_col: np.ndarray
    views: list[TaskView]

    @property
    def m(self) -> int:
        return len(self.ranges)

    @property
    def nblocks(self) -> int:
        return len(self.views)

    def block_row(self, i: int) -> list[tuple[int, TaskView]]:
        lo, hi = self.block_ptr[i], self.block_ptr[i + 1]
        return list(zip(self.block_col[lo:hi].tolist(), self.views[lo:hi]))

    def get(self, i: int, j: int) -> Optional[TaskView]:
        lo, hi = self.block_ptr[i], self.block_ptr[i + 1]
        pos = lo + int(np.searchsorted(self.block_col[lo:hi], j))
        if pos < hi and self.block_col[pos] == j:
            return self.views[pos]
        return None

    def exists(self, i: int, j: int) -> bool:
        return self.get(i, j) is not None

    def coordinates(self) -> list[tuple[int, int]]:
        return [(i, j) for i in range(self.m) for j, _ in self.block_row(i)]

    def reset_futures(self) -> None:
        for v in self.views:
            v.future = None


def build_block_matrix(factor: CsrMatrix, ranges: RangeList) -> BlockMatrix:
    if ranges.n != factor.nrows or factor.nrows != factor.ncols:
        raise ValueError(f"ranges cover [0, {ranges.n}) but the factor has {factor.nrows} rows")
    m = len(ranges)
    block_of = ranges.block_of()
    rows = factor.row_indices()
    if np.any(factor.col_idx < rows):
        raise ValueError("factor must be upper triangular")
    eb = block_of[factor.col_idx]
    # (row, column block) keys are globally sorted since columns are sorted per row
    key = rows * (m + 1) + eb
    bi = block_of[rows]
    pairs = np.unique(bi * m + eb)
    block_i, block_j = np.divmod(pairs, m)
    block_ptr = np.zeros(m + 1, dtype=INDEX)
    np.cumsum(np.bincount(block_i, minlength=m), out=block_ptr[1:])
    views = []
    for i, j in zip(block_i.tolist(), block_j.tolist()):
        rb, re = ranges[i]
        cb, ce = ranges[j]
        lr = np.arange(rb, re, dtype=INDEX)
        lo = np.searchsorted(key, lr * (m + 1) + j, "left").astype(INDEX)
        hi = np.searchsorted(key, lr * (m + 1) + j, "right").astype(INDEX)
        views.append(TaskView(factor, rb, cb, re - rb, ce - cb, lo, hi))
    has_diag = np.zeros(factor.nrows, dtype=bool)
    has_diag[rows[factor.col_idx == rows]] = True
    if not has_diag.all():
        r = int(np.flatnonzero(~has_diag)[0])
        raise ValueError(f"factor has no diagonal entry in row {r}")
    return BlockMatrix(factor, ranges, block_ptr, block_j.astype(INDEX), views)
