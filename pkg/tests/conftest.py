from __future__ import annotations

import numpy as np
import pytest
import scipy.sparse as sp

from icbyblocks.sparsecore import CsrMatrix

ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


def random_symmetric_pattern(n: int, density: float, rng: np.random.Generator) -> CsrMatrix:
    """Symmetric pattern with full diagonal; off-diagonal density <= ``density``."""
    m = sp.random(n, n, density=density / 2, random_state=rng, format="coo")
    rows = np.concatenate([m.row, m.col, np.arange(n)])
    cols = np.concatenate([m.col, m.row, np.arange(n)])
    g = sp.coo_matrix((np.ones(len(rows)), (rows, cols)), shape=(n, n)).tocsr()
    g.data[:] = 1.0
    return CsrMatrix.from_scipy(g)


def random_m_matrix(n: int, density: float, rng: np.random.Generator) -> CsrMatrix:
    """Symmetric, strictly diagonally dominant, non-positive off-diagonals.

    IC on any pattern is breakdown-free for such matrices.
    """
    pat = random_symmetric_pattern(n, density, rng).to_scipy().tocoo()
    off = pat.row < pat.col
    r, c = pat.row[off], pat.col[off]
    w = rng.uniform(0.1, 1.0, size=len(r))
    a = sp.coo_matrix((-w, (r, c)), shape=(n, n))
    a = (a + a.T).tocsr()
    diag = np.asarray(abs(a).sum(axis=1)).ravel() + rng.uniform(0.5, 1.5, size=n)
    return CsrMatrix.from_scipy(a + sp.diags(diag))


def dense_pattern(m: CsrMatrix) -> np.ndarray:
    out = np.zeros(m.shape, dtype=bool)
    out[m.row_indices(), m.col_idx] = True
    return out


def elimination_fill(a: CsrMatrix) -> set[tuple[int, int]]:
    """Upper pattern of the complete factor by explicit graph elimination."""
    n = a.nrows
    adj = [set() for _ in range(n)]
    for i, j in a.pattern_set():
        if i != j:
            adj[i].add(j)
            adj[j].add(i)
    out = set()
    for v in range(n):
        higher = sorted(u for u in adj[v] if u > v)
        out.add((v, v))
        out.update((v, u) for u in higher)
        for x in higher:
            for y in higher:
                if x != y:
                    adj[x].add(y)
    return out


def five_block_example(bs: int = 3) -> tuple[CsrMatrix, list[tuple[int, int]]]:
    """SPD matrix whose 5x5 block structure is the classic worked example.

    Nonzero upper blocks: 00, 04, 11, 13, 14, 22, 23, 24, 33, 34, 44.
    Returns the matrix and its ranges as (begin, end) pairs.
    """
    blocks = [(0, 4), (1, 3), (1, 4), (2, 3), (2, 4), (3, 4)]
    n = 5 * bs
    a = np.zeros((n, n))
    for b in range(5):
        s = b * bs
        for r in range(bs):
            if r + 1 < bs:
                a[s + r, s + r + 1] = -1.0
    for bi, bj in blocks:
        a[bi * bs, bj * bs + bs - 1] = -0.5
        a[bi * bs + bs - 1, bj * bs] = -0.25
    a = a + a.T
    a += np.diag(np.abs(a).sum(axis=1) + 1.0)
    ranges = [(b * bs, (b + 1) * bs) for b in range(5)]
    return CsrMatrix.from_dense(a), ranges


@pytest.fixture(scope="session", autouse=True)
def _compile_kernels():
    # compile numba kernels once so timing-sensitive tests see warm code
    from icbyblocks.cholbyblocks import factor_by_blocks, factor_serial
    from icbyblocks.ordering import RangeList
    from icbyblocks.scheduler import TaskPolicy
    from icbyblocks.sparsecore import grid_laplacian
    from icbyblocks.symbolic import levelk_pattern_bfs

    a = grid_laplacian(3)
    fp = levelk_pattern_bfs(a, 1)
    factor_serial(a, fp)
    with TaskPolicy() as pol:
        factor_by_blocks(a, fp, RangeList([0, 4, 9]), pol)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def random_dag(n: int, max_out: int, rng: np.random.Generator) -> list[tuple[int, int]]:
    """Edges (u, v) with u < v; each node gets at most ``max_out`` successors."""
    edges = []
    for u in range(n - 1):
        deg = int(rng.integers(0, max_out + 1))
        succ = rng.choice(np.arange(u + 1, n), size=min(deg, n - 1 - u), replace=False)
        edges.extend((u, int(v)) for v in succ)
    return edges


def run_dag(policy, n: int, edges, spawn_order=None):
    """Build and run a DAG whose tasks record their execution order."""
    log: list[int] = []
    futs = [policy.create(lambda i=i: log.append(i), label=str(i)) for i in range(n)]
    for u, v in edges:
        policy.add_dependence(futs[v], futs[u])
    for i in (range(n) if spawn_order is None else spawn_order):
        policy.spawn(futs[i])
    policy.wait()
    return futs, log


def trace_is_sound(futs, edges) -> bool:
    return (all(f.runs == 1 and f.done() for f in futs)
            and all(futs[u].end_tick < futs[v].start_tick for u, v in edges))


def dense_ic(a: np.ndarray, pattern: set[tuple[int, int]]) -> np.ndarray:
    """Plain-Python IC restricted to an upper pattern; the numeric oracle."""
    n = a.shape[0]
    u = np.triu(a).astype(float)
    mask = np.zeros((n, n), dtype=bool)
    for i, j in pattern:
        mask[i, j] = True
    u[~mask] = 0.0
    for r in range(n):
        if u[r, r] <= 0:
            raise ArithmeticError(f"pivot {u[r, r]} at row {r}")
        u[r, r] = np.sqrt(u[r, r])
        cols = [c for c in range(r + 1, n) if mask[r, c]]
        for c in cols:
            u[r, c] /= u[r, r]
        for x, c1 in enumerate(cols):
            for c2 in cols[x:]:
                if mask[c1, c2]:
                    u[c1, c2] -= u[r, c1] * u[r, c2]
    return u
