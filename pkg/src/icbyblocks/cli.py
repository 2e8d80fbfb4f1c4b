"""Command-line driver.

Exit status: 0 success, 1 numerical breakdown or verification failure,
2 input error.
"""

from __future__ import annotations

import argparse
import csv
import json
import statistics
import sys
import time
from dataclasses import dataclass, field
from typing import Optional

from .blocklayout import build_block_matrix
from .cholbyblocks import (FactorResult, export_task_dag, factor_by_blocks, factor_serial,
                           max_relative_difference)
from .kernels import FactorizationBreakdown
from .pipeline import Problem, prepare
from .scheduler import SchedulerError, TaskPolicy
from .sparsecore import (CsrMatrix, MatrixMarketError, StructuralZeroError, grid_laplacian,
                         load_matrix_market, write_matrix_market)
from .symbolic import fill_stats

VERIFY_TOL = 1e-12
EXIT_OK, EXIT_NUMERIC, EXIT_INPUT = 0, 1, 2
BENCH_HEADER = ["workers", "time_numeric_s", "speedup", "relative_overhead"]


class InputError(Exception):
    pass


@dataclass
class RunConfig:
    matrix: Optional[str] = None
    grid: Optional[tuple[int, int]] = None
    k: int = 1
    leaf_size: int = 32
    max_depth: int = 32
    treecut: int = 0
    backend: str = "seq"
    workers: int = 1
    ordering: Optional[str] = None
    single_range: bool = False
    baseline: bool = False
    out: Optional[str] = None
    stats: Optional[str] = None
    seed: int = 0
    worker_list: list[int] = field(default_factory=lambda: [1])
    repeats: int = 3

    def __post_init__(self):
        if self.k < 0 or self.treecut < 0 or self.workers < 1:
            raise InputError("require k >= 0, treecut >= 0 and workers >= 1")
        if any(w < 1 for w in self.worker_list):
            raise InputError("worker counts must be >= 1")


def _parse_grid(text: str) -> tuple[int, int]:
    try:
        parts = [int(p) for p in text.lower().split("x")]
    except ValueError:
        raise argparse.ArgumentTypeError(f"grid must look like 30x30, got {text!r}")
    if len(parts) == 1:
        parts *= 2
    if len(parts) != 2 or min(parts) < 1:
        raise argparse.ArgumentTypeError(f"grid must look like 30x30, got {text!r}")
    return parts[0], parts[1]


def _parse_workers(text: str) -> list[int]:
    try:
        return [int(w) for w in text.split(",") if w.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"worker list must be comma separated integers: {text!r}")


def load_input(cfg: RunConfig) -> CsrMatrix:
    if cfg.grid is not None:
        return grid_laplacian(*cfg.grid)
    if cfg.matrix is None:
        raise InputError("either --matrix or --grid is required")
    try:
        return load_matrix_market(cfg.matrix)
    except OSError as exc:
        raise InputError(f"cannot read {cfg.matrix}: {exc}") from exc


def _prepare(cfg: RunConfig, a: CsrMatrix) -> Problem:
    try:
        return prepare(a, cfg.k, cfg.leaf_size, cfg.max_depth, cfg.treecut,
                       cfg.ordering, cfg.single_range)
    except OSError as exc:
        raise InputError(f"cannot read ordering {cfg.ordering}: {exc}") from exc


def _dump_json(obj: dict, path: Optional[str]) -> None:
    if path:
        with open(path, "w") as fh:
            json.dump(obj, fh, indent=2, sort_keys=True)
            fh.write("\n")


def nnz_per_row(n: int, nnz: int) -> str:
    """nnz/n truncated (not rounded) to two decimals."""
    if n == 0:
        return "0.00"
    q = nnz * 100 // n
    return f"{q // 100}.{q % 100:02d}"


def cmd_info(cfg: RunConfig) -> int:
    a = load_input(cfg)
    report = {"n": a.nrows, "nnz": a.nnz, "nnz_per_row": nnz_per_row(a.nrows, a.nnz)}
    print(f"n       {a.nrows:,}")
    print(f"nnz     {a.nnz:,}")
    print(f"nnz/n   {report['nnz_per_row']}")
    _dump_json(report, cfg.stats)
    return EXIT_OK


def _symbolic_report(cfg: RunConfig, prob: Problem) -> dict:
    t0 = time.perf_counter()
    bm = build_block_matrix(prob.fill.pattern, prob.ranges)
    t1 = time.perf_counter()
    report = {"n": prob.a.nrows, "nnz": prob.a.nnz, "k": cfg.k, "treecut": cfg.treecut,
              "n_ranges": len(prob.ranges), "n_blocks": bm.nblocks,
              "nd_tree_nodes": len(prob.tree.nodes) if prob.tree else None,
              "times": dict(prob.times, block_build=t1 - t0)}
    report.update(fill_stats(prob.fill))
    return report


def cmd_symbolic(cfg: RunConfig) -> int:
    prob = _prepare(cfg, load_input(cfg))
    report = _symbolic_report(cfg, prob)
    print(json.dumps(report, indent=2, sort_keys=True))
    _dump_json(report, cfg.stats)
    return EXIT_OK


def _run_blocks(prob: Problem, backend: str, workers: int) -> FactorResult:
    with TaskPolicy(backend, workers) as policy:
        return factor_by_blocks(prob.a_permuted, prob.fill, prob.ranges, policy)


def _warm_up() -> None:
    """Load the compiled kernels so the first timed run does not pay for it."""
    a = grid_laplacian(2)
    prob = prepare(a, 0, leaf_size=1)
    factor_serial(prob.a_permuted, prob.fill)
    _run_blocks(prob, "seq", 1)


def cmd_factor(cfg: RunConfig) -> int:
    prob = _prepare(cfg, load_input(cfg))
    _warm_up()
    res = _run_blocks(prob, cfg.backend, cfg.workers)
    res.stats.times.update(prob.times)
    if cfg.baseline:
        serial = factor_serial(prob.a_permuted, prob.fill)
        res.stats.serial_time = serial.stats.times["numeric"]
        res.stats.relative_overhead = res.stats.times["numeric"] / max(res.stats.serial_time, 1e-12)
    if cfg.out:
        write_matrix_market(res.factor, cfg.out,
                            comment=f"upper IC({cfg.k}) factor of the permuted matrix")
    stats = res.stats.to_dict()
    _dump_json(stats, cfg.stats)
    print(f"n={res.stats.n} nnz(U)={res.stats.nnz_u} ranges={res.stats.n_ranges} "
          f"blocks={res.stats.n_blocks} tasks={res.stats.total_tasks} "
          f"numeric={res.stats.times['numeric']:.6f}s")
    if res.stats.relative_overhead is not None:
        print(f"T/T_serial={res.stats.relative_overhead:.3f}")
    return EXIT_OK


def cmd_verify(cfg: RunConfig, inject_error: bool = False) -> int:
    prob = _prepare(cfg, load_input(cfg))
    serial = factor_serial(prob.a_permuted, prob.fill)
    blocks = _run_blocks(prob, cfg.backend, cfg.workers)
    if inject_error and blocks.factor.nnz:
        blocks.factor.values[blocks.factor.nnz // 2] *= 1.0 + 1e-6
    diff = max_relative_difference(blocks.factor, serial.factor)
    ok = diff <= VERIFY_TOL
    print(f"max relative difference: {diff:.3e} (tolerance {VERIFY_TOL:g}) "
          f"{'PASS' if ok else 'FAIL'}")
    _dump_json({"max_relative_difference": diff, "tolerance": VERIFY_TOL, "pass": ok}, cfg.stats)
    return EXIT_OK if ok else EXIT_NUMERIC


def bench_rows(prob: Problem, worker_list: list[int], repeats: int = 3) -> list[dict]:
    def median_time(fn) -> float:
        return statistics.median(fn() for _ in range(repeats))

    _warm_up()

    t_serial = median_time(lambda: factor_serial(prob.a_permuted, prob.fill).stats.times["numeric"])
    times = {}
    for w in sorted(set(worker_list) | {1}):
        times[w] = median_time(lambda: _run_blocks(prob, "pool", w).stats.times["numeric"])
    rows = [{"workers": "serial", "time_numeric_s": t_serial,
             "speedup": times[1] / t_serial, "relative_overhead": 1.0}]
    for w in worker_list:
        rows.append({"workers": w, "time_numeric_s": times[w],
                     "speedup": times[1] / times[w], "relative_overhead": times[w] / t_serial})
    return rows


def cmd_bench(cfg: RunConfig) -> int:
    prob = _prepare(cfg, load_input(cfg))
    rows = bench_rows(prob, cfg.worker_list, cfg.repeats)
    out = open(cfg.out, "w", newline="") if cfg.out else sys.stdout
    try:
        writer = csv.DictWriter(out, fieldnames=BENCH_HEADER, lineterminator="\n")
        writer.writeheader()
        for row in rows:
            writer.writerow({k: (f"{v:.6g}" if isinstance(v, float) else v) for k, v in row.items()})
    finally:
        if out is not sys.stdout:
            out.close()
    return EXIT_OK


def cmd_taskdag(cfg: RunConfig) -> int:
    prob = _prepare(cfg, load_input(cfg))
    dag = export_task_dag(prob.a_permuted, prob.fill, prob.ranges)
    text = dag.to_dot()
    if cfg.out:
        with open(cfg.out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    print(f"{len(dag.labels)} tasks, {len(dag.edges)} edges", file=sys.stderr)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    src = common.add_mutually_exclusive_group()
    src.add_argument("--matrix", help="Matrix Market file (coordinate, real or pattern)")
    src.add_argument("--grid", type=_parse_grid, help="use a 5-point grid Laplacian, e.g. 30x30")
    common.add_argument("--level", "-k", dest="k", type=int, default=1, help="fill level k")
    common.add_argument("--treecut", "-t", type=int, default=0,
                        help="fuse ND subtrees of height <= t into one range")
    common.add_argument("--leaf-size", type=int, default=32)
    common.add_argument("--max-depth", type=int, default=32)
    common.add_argument("--workers", type=int, default=1)
    common.add_argument("--backend", choices=["seq", "pool"], default="seq")
    common.add_argument("--ordering", help="import permutation and ranges instead of ND")
    common.add_argument("--single-range", action="store_true",
                        help="treat the whole matrix as one block")
    common.add_argument("--baseline", action="store_true",
                        help="also time the serial factorization and report T/T_serial")
    common.add_argument("--out", help="output file")
    common.add_argument("--stats", help="JSON stats output file")
    common.add_argument("--seed", type=int, default=0, help="reserved")

    parser = argparse.ArgumentParser(prog="icbyblocks",
                                     description="Level(k) incomplete Cholesky by blocks.")
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("info", parents=[common], help="matrix size and density")
    sub.add_parser("symbolic", parents=[common], help="ordering, fill and block statistics")
    sub.add_parser("factor", parents=[common], help="factor by blocks, write U")
    v = sub.add_parser("verify", parents=[common], help="compare by-blocks with serial IC(k)")
    v.add_argument("--inject-error", action="store_true", help=argparse.SUPPRESS)
    b = sub.add_parser("bench", parents=[common], help="thread sweep, CSV output")
    b.add_argument("--worker-list", type=_parse_workers, default=[1, 2, 4])
    b.add_argument("--repeats", type=int, default=3)
    sub.add_parser("taskdag", parents=[common], help="export the task DAG as Graphviz DOT")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = RunConfig(matrix=args.matrix, grid=args.grid, k=args.k, leaf_size=args.leaf_size,
                        max_depth=args.max_depth, treecut=args.treecut, backend=args.backend,
                        workers=args.workers, ordering=args.ordering,
                        single_range=args.single_range, baseline=args.baseline, out=args.out,
                        stats=args.stats, seed=args.seed,
                        worker_list=getattr(args, "worker_list", [1]),
                        repeats=getattr(args, "repeats", 3))
        if args.command == "verify":
            return cmd_verify(cfg, args.inject_error)
        return {"info": cmd_info, "symbolic": cmd_symbolic, "factor": cmd_factor,
                "bench": cmd_bench, "taskdag": cmd_taskdag}[args.command](cfg)
    except FactorizationBreakdown as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (InputError, MatrixMarketError, StructuralZeroError, ValueError, SchedulerError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
