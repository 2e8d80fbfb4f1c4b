"""Scalar CSR storage, Matrix Market I/O and symmetric permutation."""

from __future__ import annotations

import os
from dataclasses import dataclass

import numpy as np
import scipy.io
import scipy.sparse as sp

INDEX = np.int64


class MatrixMarketError(ValueError):
    pass


class StructuralZeroError(ValueError):
    """A diagonal entry required as a pivot is absent from the pattern."""

    def __init__(self, row: int):
        super().__init__(f"structurally zero diagonal entry at row {row}")
        self.row = row


@dataclass
class CsrMatrix:
    nrows: int
    ncols: int
    row_ptr: np.ndarray
    col_idx: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        self.row_ptr = np.ascontiguousarray(self.row_ptr, dtype=INDEX)
        self.col_idx = np.ascontiguousarray(self.col_idx, dtype=INDEX)
        self.values = np.ascontiguousarray(self.values, dtype=np.float64)

    @property
    def nnz(self) -> int:
        return int(self.row_ptr[-1])

    @property
    def shape(self) -> tuple[int, int]:
        return (self.nrows, self.ncols)

    def validate(self) -> "CsrMatrix":
        if self.row_ptr.shape != (self.nrows + 1,):
            raise ValueError("row_ptr must have nrows+1 entries")
        if self.row_ptr[0] != 0 or np.any(np.diff(self.row_ptr) < 0):
            raise ValueError("row_ptr must start at 0 and be non-decreasing")
        if self.row_ptr[-1] != len(self.col_idx) or len(self.col_idx) != len(self.values):
            raise ValueError("row_ptr[-1], col_idx and values lengths disagree")
        if len(self.col_idx):
            if self.col_idx.min() < 0 or self.col_idx.max() >= self.ncols:
                raise ValueError("column index out of range")
            # strictly increasing inside every row
            step = np.diff(self.col_idx)
            row_start = np.zeros(len(self.col_idx), dtype=bool)
            row_start[self.row_ptr[:-1][np.diff(self.row_ptr) > 0]] = True
            if np.any((step <= 0) & ~row_start[1:]):
                raise ValueError("column indices must be strictly increasing within rows")
        return self

    def row_indices(self) -> np.ndarray:
        """Row index of every stored entry."""
        return np.repeat(np.arange(self.nrows, dtype=INDEX), np.diff(self.row_ptr))

    def row(self, i: int) -> tuple[np.ndarray, np.ndarray]:
        lo, hi = self.row_ptr[i], self.row_ptr[i + 1]
        return self.col_idx[lo:hi], self.values[lo:hi]

    def copy(self) -> "CsrMatrix":
        return CsrMatrix(self.nrows, self.ncols, self.row_ptr.copy(),
                         self.col_idx.copy(), self.values.copy())

    def with_values(self, values: np.ndarray) -> "CsrMatrix":
        """Same pattern (shared index arrays), new value array."""
        return CsrMatrix(self.nrows, self.ncols, self.row_ptr, self.col_idx, values)

    def same_pattern(self, other: "CsrMatrix") -> bool:
        return (self.shape == other.shape
                and np.array_equal(self.row_ptr, other.row_ptr)
                and np.array_equal(self.col_idx, other.col_idx))

    def pattern_set(self) -> set[tuple[int, int]]:
        return set(zip(self.row_indices().tolist(), self.col_idx.tolist()))

    def to_scipy(self) -> sp.csr_matrix:
        return sp.csr_matrix((self.values, self.col_idx, self.row_ptr), shape=self.shape)

    def todense(self) -> np.ndarray:
        out = np.zeros(self.shape)
        out[self.row_indices(), self.col_idx] = self.values
        return out

    @classmethod
    def from_scipy(cls, m) -> "CsrMatrix":
        m = sp.csr_matrix(m)
        m.sum_duplicates()
        m.sort_indices()
        return cls(m.shape[0], m.shape[1], m.indptr, m.indices, m.data)

    @classmethod
    def from_dense(cls, a: np.ndarray) -> "CsrMatrix":
        """Dense array to CSR; exact zeros are not stored."""
        return cls.from_scipy(sp.csr_matrix(np.asarray(a, dtype=np.float64)))

    @classmethod
    def identity(cls, n: int) -> "CsrMatrix":
        idx = np.arange(n, dtype=INDEX)
        return cls(n, n, np.arange(n + 1, dtype=INDEX), idx, np.ones(n))


@dataclass(frozen=True)
class Permutation:
    """``perm[old] = new`` and ``iperm[new] = old``."""

    perm: np.ndarray
    iperm: np.ndarray

    @classmethod
    def from_perm(cls, perm) -> "Permutation":
        perm = np.asarray(perm, dtype=INDEX)
        n = len(perm)
        if perm.ndim != 1 or (n and (perm.min() < 0 or perm.max() >= n)) \
                or len(np.unique(perm)) != n:
            raise ValueError("permutation is not a bijection")
        iperm = np.empty_like(perm)
        iperm[perm] = np.arange(n, dtype=INDEX)
        return cls(perm, iperm)

    @classmethod
    def from_iperm(cls, iperm) -> "Permutation":
        inv = cls.from_perm(iperm)
        return cls(inv.iperm, inv.perm)

    @classmethod
    def identity(cls, n: int) -> "Permutation":
        return cls(np.arange(n, dtype=INDEX), np.arange(n, dtype=INDEX))

    def __len__(self) -> int:
        return len(self.perm)

    def inverse(self) -> "Permutation":
        return Permutation(self.iperm, self.perm)


def load_matrix_market(path) -> CsrMatrix:
    """Read a coordinate Matrix Market file into full-storage CSR.

    Symmetric files are mirrored, duplicates summed and pattern files get
    unit values.
    """
    path = os.fspath(path)
    try:
        nrows, ncols, _, fmt, field, _ = scipy.io.mminfo(path)
    except (OSError, ValueError, IndexError) as exc:
        raise MatrixMarketError(f"{path}: cannot parse Matrix Market header: {exc}") from exc
    if fmt != "coordinate":
        raise MatrixMarketError(f"{path}: only coordinate format is supported, got {fmt!r}")
    if field == "complex":
        raise MatrixMarketError(f"{path}: complex matrices are not supported")
    if nrows != ncols:
        raise MatrixMarketError(f"{path}: matrix is not square ({nrows} x {ncols})")
    try:
        coo = scipy.io.mmread(path)
    except (OSError, ValueError, IndexError) as exc:
        raise MatrixMarketError(f"{path}: {exc}") from exc
    coo = sp.coo_matrix(coo)
    # coo -> csr sums duplicates but keeps explicit zeros, which are structural
    return CsrMatrix.from_scipy(coo.tocsr().astype(np.float64)).validate()


def write_matrix_market(m: CsrMatrix, path, comment: str | None = None) -> None:
    rows = m.row_indices() + 1
    cols = m.col_idx + 1
    with open(path, "w", encoding="ascii") as fh:
        fh.write("%%MatrixMarket matrix coordinate real general\n")
        if comment:
            for line in comment.splitlines():
                fh.write(f"% {line}\n")
        fh.write(f"{m.nrows} {m.ncols} {m.nnz}\n")
        fh.writelines(f"{r} {c} {v!r}\n" for r, c, v in
                      zip(rows.tolist(), cols.tolist(), m.values.tolist()))


def permute_symmetric(a: CsrMatrix, p: Permutation) -> CsrMatrix:
    """Return ``P^T A P``: entry (i, j) of ``a`` moves to (perm[i], perm[j])."""
    if a.nrows != a.ncols:
        raise ValueError("permute_symmetric needs a square matrix")
    if len(p) != a.nrows:
        raise ValueError(f"permutation size {len(p)} does not match matrix size {a.nrows}")
    counts = np.diff(a.row_ptr)[p.iperm]
    row_ptr = np.zeros(a.nrows + 1, dtype=INDEX)
    np.cumsum(counts, out=row_ptr[1:])
    # gather old rows in new order
    starts = a.row_ptr[p.iperm]
    src = np.repeat(starts - row_ptr[:-1], counts) + np.arange(a.nnz, dtype=INDEX)
    cols = p.perm[a.col_idx[src]]
    vals = a.values[src]
    new_rows = np.repeat(np.arange(a.nrows, dtype=INDEX), counts)
    order = np.lexsort((cols, new_rows))
    return CsrMatrix(a.nrows, a.ncols, row_ptr, cols[order], vals[order])


def extract_upper(a: CsrMatrix) -> CsrMatrix:
    """Entries with column >= row; every diagonal entry must be stored."""
    if a.nrows != a.ncols:
        raise ValueError("extract_upper needs a square matrix")
    rows = a.row_indices()
    keep = a.col_idx >= rows
    has_diag = np.zeros(a.nrows, dtype=bool)
    has_diag[rows[a.col_idx == rows]] = True
    if not has_diag.all():
        raise StructuralZeroError(int(np.flatnonzero(~has_diag)[0]))
    row_ptr = np.zeros(a.nrows + 1, dtype=INDEX)
    np.cumsum(np.bincount(rows[keep], minlength=a.nrows), out=row_ptr[1:])
    return CsrMatrix(a.nrows, a.ncols, row_ptr, a.col_idx[keep], a.values[keep])


def grid_laplacian(nx: int, ny: int | None = None) -> CsrMatrix:
    """5-point Laplacian on an ``nx`` by ``ny`` grid, natural ordering."""
    ny = nx if ny is None else ny
    tx = sp.diags([-1.0, 2.0, -1.0], [-1, 0, 1], shape=(nx, nx))
    ty = sp.diags([-1.0, 2.0, -1.0], [-1, 0, 1], shape=(ny, ny))
    lap = (sp.kron(sp.identity(ny), tx) + sp.kron(ty, sp.identity(nx))).tocsr()
    lap.eliminate_zeros()
    return CsrMatrix.from_scipy(lap)
