"""Pattern-restricted block kernels: Chol, Trsm, Herk and Gemm.

All four work in place on the base factor through views. Every update
``target -= x * y`` is applied only if the target coordinate belongs to the
factor pattern; contributions to absent coordinates are dropped. Target
lookup walks the sorted target row segment in step with the sorted source
row, so no scatter workspace is needed and kernels on distinct blocks can
run concurrently.

Updates to any one coordinate are applied in ascending pivot-row order, the
same order as the scalar right-looking factorization.
"""

from __future__ import annotations

import math

import numba

from .blocklayout import MatrixView


class FactorizationBreakdown(ArithmeticError):
    """Non-positive (or non-finite) pivot met during factorization."""

    def __init__(self, row: int, pivot: float):
        super().__init__(f"factorization breakdown at row {row}: pivot {pivot!r} is not positive")
        self.row = row
        self.pivot = pivot


@numba.njit(nogil=True, cache=True)
def _merge_update(col_idx, values, scale_pos, src_lo, src_hi, tgt_lo, tgt_hi):
    # target[c] -= values[scale_pos] * source[c] for columns c present in both
    s = values[scale_pos]
    b = src_lo
    t = tgt_lo
    while b < src_hi and t < tgt_hi:
        cb = col_idx[b]
        ct = col_idx[t]
        if cb == ct:
            values[t] -= s * values[b]
            b += 1
            t += 1
        elif cb < ct:
            b += 1
        else:
            t += 1


@numba.njit(nogil=True, cache=True)
def _chol_kernel(col_idx, values, lo, hi, row_begin):
    nrows = lo.shape[0]
    for lr in range(nrows):
        start = lo[lr]
        stop = hi[lr]
        if start == stop or col_idx[start] != row_begin + lr:
            return row_begin + lr, 0.0
        d = values[start]
        if not d > 0.0 or not math.isfinite(d):
            return row_begin + lr, d
        d = math.sqrt(d)
        values[start] = d
        for p in range(start + 1, stop):
            values[p] /= d
        for a in range(start + 1, stop):
            tr = col_idx[a] - row_begin
            _merge_update(col_idx, values, a, a, stop, lo[tr], hi[tr])
    return -1, 0.0


@numba.njit(nogil=True, cache=True)
def _trsm_kernel(col_idx, values, app_lo, app_hi, row_begin, apj_lo, apj_hi):
    nrows = app_lo.shape[0]
    for lr in range(nrows):
        start = app_lo[lr]
        d = values[start]
        if d == 0.0:
            return row_begin + lr
        for p in range(apj_lo[lr], apj_hi[lr]):
            values[p] /= d
        for a in range(start + 1, app_hi[lr]):
            tr = col_idx[a] - row_begin
            _merge_update(col_idx, values, a, apj_lo[lr], apj_hi[lr], apj_lo[tr], apj_hi[tr])
    return -1


@numba.njit(nogil=True, cache=True)
def _update_kernel(col_idx, values, api_lo, api_hi, apj_lo, apj_hi,
                   aij_lo, aij_hi, target_row_begin, symmetric):
    nrows = api_lo.shape[0]
    for lp in range(nrows):
        for a in range(api_lo[lp], api_hi[lp]):
            tr = col_idx[a] - target_row_begin
            src_lo = a if symmetric else apj_lo[lp]
            _merge_update(col_idx, values, a, src_lo, apj_hi[lp], aij_lo[tr], aij_hi[tr])


def chol_block(app: MatrixView) -> None:
    """Incomplete Cholesky of a diagonal block, in place."""
    if not app.is_diagonal:
        raise ValueError("chol_block needs a square view on the diagonal")
    base = app.base
    row, pivot = _chol_kernel(base.col_idx, base.values, app.row_lo, app.row_hi, app.row_begin)
    if row >= 0:
        raise FactorizationBreakdown(int(row), float(pivot))


def trsm_block(app: MatrixView, apj: MatrixView) -> None:
    """Solve ``U_pp^T X = A_pj`` in place on the pattern of ``apj``."""
    if not app.is_diagonal or apj.row_begin != app.row_begin or apj.nrows != app.nrows:
        raise ValueError("trsm_block needs a factored diagonal view and a view in the same block row")
    base = app.base
    row = _trsm_kernel(base.col_idx, base.values, app.row_lo, app.row_hi, app.row_begin,
                       apj.row_lo, apj.row_hi)
    if row >= 0:
        raise FactorizationBreakdown(int(row), 0.0)


def herk_block(apj: MatrixView, ajj: MatrixView) -> None:
    """``A_jj -= A_pj^T A_pj`` restricted to the pattern of ``ajj``."""
    if not ajj.is_diagonal or apj.col_begin != ajj.row_begin or apj.ncols != ajj.nrows:
        raise ValueError("herk_block needs a diagonal target matching the source columns")
    base = apj.base
    _update_kernel(base.col_idx, base.values, apj.row_lo, apj.row_hi, apj.row_lo, apj.row_hi,
                   ajj.row_lo, ajj.row_hi, ajj.row_begin, True)


def gemm_block(api: MatrixView, apj: MatrixView, aij: MatrixView) -> None:
    """``A_ij -= A_pi^T A_pj`` restricted to the pattern of ``aij`` (i < j)."""
    if api is apj or api.col_begin == apj.col_begin:
        raise ValueError("gemm_block needs two distinct source blocks; use herk_block for i == j")
    if (api.row_begin != apj.row_begin or api.nrows != apj.nrows
            or aij.row_begin != api.col_begin or aij.nrows != api.ncols
            or aij.col_begin != apj.col_begin or aij.ncols != apj.ncols):
        raise ValueError("gemm_block views have incompatible extents")
    if aij.row_begin >= aij.col_begin:
        raise ValueError("gemm_block target must lie strictly above the diagonal")
    base = api.base
    _update_kernel(base.col_idx, base.values, api.row_lo, api.row_hi, apj.row_lo, apj.row_hi,
                   aij.row_lo, aij.row_hi, aij.row_begin, False)
