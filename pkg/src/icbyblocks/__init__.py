"""Level(k) incomplete Cholesky factorization by blocks, driven by a task DAG."""

from .blocklayout import BlockMatrix, MatrixView, TaskView, build_block_matrix, row_view
from .cholbyblocks import (FactorResult, FactorStats, export_task_dag, factor_by_blocks,
                           factor_serial)
from .kernels import FactorizationBreakdown, chol_block, gemm_block, herk_block, trsm_block
from .ordering import NdTree, RangeList, load_ordering, nested_dissection, prune_tree
from .pipeline import prepare
from .scheduler import Future, TaskPolicy, TaskState, wait
from .sparsecore import (CsrMatrix, Permutation, extract_upper, grid_laplacian,
                         load_matrix_market, permute_symmetric, write_matrix_market)
from .symbolic import FillPattern, fill_stats, levelk_pattern_bfs, levelk_pattern_oracle

__version__ = "0.1.0"
