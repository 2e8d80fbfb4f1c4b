"""Serial scalar IC(k) and the task-generating Cholesky-by-blocks driver."""

from __future__ import annotations

import math
import time
from collections import Counter
from dataclasses import asdict, dataclass, field
from typing import Callable, Optional

import numba
import numpy as np

from .blocklayout import BlockMatrix, TaskView, build_block_matrix
from .kernels import FactorizationBreakdown, chol_block, gemm_block, herk_block, trsm_block
from .ordering import RangeList
from .scheduler import TaskPolicy
from .sparsecore import CsrMatrix, extract_upper
from .symbolic import FillPattern

KINDS = ("chol", "trsm", "herk", "gemm")


@dataclass
class FactorStats:
    times: dict = field(default_factory=lambda: {
        "ordering": 0.0, "symbolic": 0.0, "block_build": 0.0, "numeric": 0.0})
    task_counts: dict = field(default_factory=lambda: dict.fromkeys(KINDS, 0))
    backend: str = "serial"
    threads: int = 1
    n: int = 0
    nnz_u: int = 0
    n_ranges: int = 1
    n_blocks: int = 1
    serial_time: Optional[float] = None
    relative_overhead: Optional[float] = None

    @property
    def total_tasks(self) -> int:
        return sum(self.task_counts.values())

    def to_dict(self) -> dict:
        d = asdict(self)
        d["total_tasks"] = self.total_tasks
        return d


@dataclass
class FactorResult:
    factor: CsrMatrix
    stats: FactorStats


def initial_factor(a_permuted: CsrMatrix, fp: FillPattern) -> CsrMatrix:
    """Scatter triu(A) onto the fill pattern; pattern slots absent from A start at 0."""
    upper = extract_upper(a_permuted)
    pat = fp.pattern
    values = np.zeros(pat.nnz)
    rows = upper.row_indices()
    pos = _locate(pat, rows, upper.col_idx)
    if np.any(pos < 0):
        raise ValueError("fill pattern does not contain the upper triangle of A")
    values[pos] = upper.values
    return CsrMatrix(pat.nrows, pat.ncols, pat.row_ptr.copy(), pat.col_idx.copy(), values)


def _locate(m: CsrMatrix, rows: np.ndarray, cols: np.ndarray) -> np.ndarray:
    """Offsets of (row, col) entries in ``m``, -1 where absent."""
    keys = m.row_indices() * m.ncols + m.col_idx
    want = rows * m.ncols + cols
    pos = np.searchsorted(keys, want)
    found = pos < len(keys)
    found[found] = keys[pos[found]] == want[found]
    return np.where(found, pos, -1)


@numba.njit(cache=True)
def _serial_ic(row_ptr, col_idx, values, n):
    for r in range(n):
        start = row_ptr[r]
        stop = row_ptr[r + 1]
        d = values[start]
        if not d > 0.0 or not math.isfinite(d):
            return r, d
        d = math.sqrt(d)
        values[start] = d
        for p in range(start + 1, stop):
            values[p] /= d
        for a in range(start + 1, stop):
            c1 = col_idx[a]
            u1 = values[a]
            # pair (c1, c2), c2 >= c1, against row c1 of the pattern
            t = row_ptr[c1]
            tend = row_ptr[c1 + 1]
            b = a
            while b < stop and t < tend:
                if col_idx[b] == col_idx[t]:
                    values[t] -= u1 * values[b]
                    b += 1
                    t += 1
                elif col_idx[b] < col_idx[t]:
                    b += 1
                else:
                    t += 1
    return -1, 0.0


def factor_serial(a_permuted: CsrMatrix, fp: FillPattern) -> FactorResult:
    """Scalar right-looking IC on the fixed pattern; the numeric reference."""
    # the pattern holds triu(A), so each row starts with its diagonal
    u = initial_factor(a_permuted, fp)
    t0 = time.perf_counter()
    row, pivot = _serial_ic(u.row_ptr, u.col_idx, u.values, u.nrows)
    elapsed = time.perf_counter() - t0
    if row >= 0:
        raise FactorizationBreakdown(int(row), float(pivot))
    stats = FactorStats(n=u.nrows, nnz_u=u.nnz)
    stats.times["numeric"] = elapsed
    stats.task_counts["chol"] = 1
    return FactorResult(u, stats)


def generate_tasks(bm: BlockMatrix, policy, make_work: Callable[..., Callable[[], None]]) -> Counter:
    """Walk the block matrix and emit Chol, Trsm, Herk/Gemm tasks.

    ``policy`` needs ``create``, ``add_dependence`` and ``spawn``; each task
    depends on the current futures of the blocks it touches and then becomes
    the future of the block it writes. ``make_work(kind, *views)`` builds
    the task body.
    """
    counts: Counter = Counter(dict.fromkeys(KINDS, 0))
    for p in range(bm.m):
        app = bm.get(p, p)
        f = policy.create(make_work("chol", app), label=f"CHOL({p},{p})")
        policy.add_dependence(f, app.future)
        app.future = f
        policy.spawn(f)
        counts["chol"] += 1

        row = [(j, v) for j, v in bm.block_row(p) if j != p]
        for j, apj in row:
            f = policy.create(make_work("trsm", app, apj), label=f"TRSM({p},{j})")
            policy.add_dependence(f, app.future)
            policy.add_dependence(f, apj.future)
            apj.future = f
            policy.spawn(f)
            counts["trsm"] += 1

        for ii, (i, api) in enumerate(row):
            for j, apj in row[ii:]:
                aij = bm.get(i, j)
                if aij is None:
                    continue
                if i == j:
                    f = policy.create(make_work("herk", apj, aij), label=f"HERK({i},{j})")
                    kind = "herk"
                else:
                    f = policy.create(make_work("gemm", api, apj, aij), label=f"GEMM({i},{j})")
                    kind = "gemm"
                policy.add_dependence(f, api.future)
                if apj is not api:
                    policy.add_dependence(f, apj.future)
                policy.add_dependence(f, aij.future)
                aij.future = f
                policy.spawn(f)
                counts[kind] += 1
    return counts


_KERNELS = {"chol": chol_block, "trsm": trsm_block, "herk": herk_block, "gemm": gemm_block}


def _kernel_work(kind: str, *views: TaskView) -> Callable[[], None]:
    fn = _KERNELS[kind]
    return lambda: fn(*views)


def factor_by_blocks(a_permuted: CsrMatrix, fp: FillPattern, ranges: RangeList,
                     policy: TaskPolicy) -> FactorResult:
    u = initial_factor(a_permuted, fp)
    t0 = time.perf_counter()
    bm = build_block_matrix(u, ranges)
    t1 = time.perf_counter()
    counts = generate_tasks(bm, policy, _kernel_work)
    try:
        policy.wait()
    finally:
        bm.reset_futures()
        policy.forget_completed()
    t2 = time.perf_counter()
    stats = FactorStats(backend=policy.backend, threads=policy.workers, n=u.nrows,
                        nnz_u=u.nnz, n_ranges=len(ranges), n_blocks=bm.nblocks)
    stats.task_counts.update(counts)
    stats.times["block_build"] = t1 - t0
    stats.times["numeric"] = t2 - t1
    return FactorResult(u, stats)


@dataclass
class TaskDag:
    labels: list[str]
    edges: list[tuple[int, int]]  # (dependence, dependent)
    iteration: list[int]

    def to_dot(self, name: str = "taskdag") -> str:
        lines = [f"digraph {name} {{"]
        lines += [f'  t{i} [label="{lab}"];' for i, lab in enumerate(self.labels)]
        lines += [f"  t{a} -> t{b};" for a, b in self.edges]
        lines.append("}")
        return "\n".join(lines) + "\n"

    def parents(self) -> list[set[int]]:
        out: list[set[int]] = [set() for _ in self.labels]
        for a, b in self.edges:
            out[b].add(a)
        return out

    def ancestors(self, node: int) -> set[int]:
        par = self.parents()
        seen: set[int] = set()
        stack = [node]
        while stack:
            for q in par[stack.pop()]:
                if q not in seen:
                    seen.add(q)
                    stack.append(q)
        return seen


class _DagRecorder:
    """Policy stand-in that records tasks and edges without running anything."""

    def __init__(self):
        self.labels: list[str] = []
        self.iteration: list[int] = []
        self.edges: list[tuple[int, int]] = []
        self._seen: set[tuple[int, int]] = set()
        self._iter = -1

    def create(self, work, label=None) -> int:
        if label.startswith("CHOL"):
            self._iter += 1
        self.labels.append(label)
        self.iteration.append(self._iter)
        return len(self.labels) - 1

    def add_dependence(self, f: int, dep: Optional[int]) -> None:
        if dep is not None and (dep, f) not in self._seen:
            self._seen.add((dep, f))
            self.edges.append((dep, f))

    def spawn(self, f: int) -> None:
        pass


def export_task_dag_blocks(bm: BlockMatrix) -> TaskDag:
    rec = _DagRecorder()
    try:
        generate_tasks(bm, rec, lambda kind, *views: None)
    finally:
        bm.reset_futures()
    return TaskDag(rec.labels, rec.edges, rec.iteration)


def export_task_dag(a_permuted: CsrMatrix, fp: FillPattern, ranges: RangeList) -> TaskDag:
    """Dry run of the task generator: nodes and dependence edges only."""
    return export_task_dag_blocks(build_block_matrix(initial_factor(a_permuted, fp), ranges))


def max_relative_difference(u: CsrMatrix, ref: CsrMatrix, eps: float = 1e-300) -> float:
    """max |u - ref| / (|ref| + eps) over the shared pattern."""
    if not u.same_pattern(ref):
        return math.inf
    if ref.nnz == 0:
        return 0.0
    return float(np.max(np.abs(u.values - ref.values) / (np.abs(ref.values) + eps)))
