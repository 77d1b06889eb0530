"""Benchmark harness: run a configured mode over a dataset, score against
the exact oracle, and emit frozen-format reports.

Output files (all schemas documented in the README):

* ``results.csv``   - one row per instance: instance, mode, kind,
  best_objective, optimum, oracle_timed_out, apr, seconds
* ``trajectory.csv``- mode, step, mean_apr, instances (best-so-far means)
* ``aggregate.md``  - one markdown summary table
* ``report.json``   - machine-readable rows + aggregates + config echo
* ``adapt_records.json`` - per (instance, seed, step) adaptation records

Rows whose oracle timed out carry an empty ``apr`` and are excluded from
means but counted. Timing columns are wall clock and therefore not
reproducible run to run; set ``timing: false`` in the config to zero them,
which makes every output byte-identical for a fixed config.
"""

from __future__ import annotations

import json
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .adapt import (
    AdaptReport,
    SpParams,
    fine_tune,
    rand_init_seed,
    taco_online,
    train_egn,
    train_meta,
)
from .config import RunConfig
from .graphs import Graph, load_graph, load_stream
from .model import ParameterSet, init_parameters, load_parameters, save_parameters
from .objectives import Problem, ProblemKind, as_kind
from .oracles import OracleResult, solve_exact_mc, solve_exact_mvc

RESULTS_CSV_HEADER = "instance,mode,kind,best_objective,optimum,oracle_timed_out,apr,seconds"
TRAJECTORY_CSV_HEADER = "mode,step,mean_apr,instances"
SWEEP_CSV_HEADER = "mode,lambda_shrink,lambda_perturb,mean_apr,std_apr,instances"


@dataclass(frozen=True)
class BenchRow:
    instance: str
    mode: str
    kind: str
    best_objective: float
    optimum: int
    oracle_timed_out: bool
    apr: float | None
    seconds: float


@dataclass
class BenchReport:
    rows: list[BenchRow]
    trajectory: list[tuple[str, int, float, int]]
    config: RunConfig
    adapt_reports: list[AdaptReport]

    @property
    def aprs(self) -> list[float]:
        return [r.apr for r in self.rows if r.apr is not None]

    @property
    def mean_apr(self) -> float:
        return float(np.mean(self.aprs)) if self.aprs else float("nan")

    @property
    def std_apr(self) -> float:
        return float(np.std(self.aprs)) if self.aprs else float("nan")

    @property
    def mean_seconds(self) -> float:
        return float(np.mean([r.seconds for r in self.rows])) if self.rows else 0.0

    @property
    def timeouts(self) -> int:
        return sum(1 for r in self.rows if r.oracle_timed_out)


def load_dataset(directory: str | Path) -> list[tuple[str, Graph]]:
    """All edge-list files in a directory, sorted by filename."""
    directory = Path(directory)
    files = sorted(directory.glob("*.el"))
    if not files:
        raise FileNotFoundError(f"no .el files in {directory}")
    return [(f.stem, load_graph(f)) for f in files]


def compute_optima(
    kind: ProblemKind | str,
    named_graphs: list[tuple[str, Graph]],
    node_budget: int,
) -> dict[str, OracleResult]:
    kind = as_kind(kind)
    solver = solve_exact_mvc if kind is ProblemKind.MVC else solve_exact_mc
    return {name: solver(g, node_budget) for name, g in named_graphs}


def apr_of(kind: ProblemKind, best_objective: float, optimum: int) -> float:
    """f(G, x) / f(G, x*); defined as 1.0 when both sides are zero."""
    if optimum > 0:
        return best_objective / optimum
    return 1.0 if best_objective == 0 else float("inf")


def _run_unit(args) -> tuple[int, AdaptReport]:
    cfg, problem, theta, idx, g = args
    mode = cfg.mode
    if mode in ("EGN", "MetaEGN"):
        report = fine_tune(theta, g, problem, cfg.replace(tune_steps=0), instance_tag=idx)
    elif mode in ("EGN-FT", "MetaEGN-FT"):
        report = fine_tune(theta, g, problem, cfg, instance_tag=idx)
    elif mode == "EGN-rand-FT":
        overrides = {
            s: init_parameters(
                cfg.d_in,
                cfg.d,
                rand_init_seed(cfg.master_seed, idx, s),
                layers=cfg.layers,
                eps_learnable=cfg.eps_learnable,
            )
            for s in range(cfg.seeds)
        }
        report = fine_tune(
            overrides[0], g, problem, cfg, instance_tag=idx, start_overrides=overrides
        )
    elif mode in ("EGN-TACO", "MetaEGN-TACO"):
        sp = SpParams(cfg.lambda_shrink, cfg.lambda_perturb, cfg.sigma)
        report = fine_tune(theta, g, problem, cfg, instance_tag=idx, sp=sp)
    else:
        raise ValueError(f"mode {cfg.mode!r} is not a per-instance mode")
    return idx, report


def run_mode(
    cfg: RunConfig,
    problem: Problem,
    graphs: list[Graph],
    theta: ParameterSet | None,
) -> list[AdaptReport]:
    """Adaptation reports for every instance under the configured mode.

    Online modes chain parameters through the instance sequence and always
    run serially; other modes fan out over ``cfg.resolved_workers``.
    """
    if cfg.online_mode:
        sp_first = SpParams(cfg.lambda_shrink, cfg.lambda_perturb, cfg.sigma)
        sp_online = SpParams(cfg.lambda_shrink_online, cfg.lambda_perturb, cfg.sigma)
        return taco_online(theta, graphs, sp_first, sp_online, problem, cfg)
    units = [(cfg, problem, theta, idx, g) for idx, g in enumerate(graphs)]
    workers = cfg.resolved_workers
    if workers > 1 and len(units) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            indexed = list(pool.map(_run_unit, units))
    else:
        indexed = [_run_unit(u) for u in units]
    indexed.sort(key=lambda t: t[0])
    return [rep for _, rep in indexed]


def bench_instances(
    cfg: RunConfig,
    named_graphs: list[tuple[str, Graph]],
    theta: ParameterSet | None,
    optima: dict[str, OracleResult] | None = None,
) -> BenchReport:
    problem = Problem(cfg.problem, cfg.beta_tune, cfg.mc_penalty)
    kind = problem.kind
    if optima is None:
        optima = compute_optima(kind, named_graphs, cfg.node_budget)
    reports = run_mode(cfg, problem, [g for _, g in named_graphs], theta)
    rows: list[BenchRow] = []
    for (name, _g), report in zip(named_graphs, reports):
        oracle = optima[name]
        apr = None if oracle.timed_out else apr_of(kind, report.best.objective, oracle.optimum)
        rows.append(
            BenchRow(
                instance=name,
                mode=cfg.mode,
                kind=kind.value,
                best_objective=report.best.objective,
                optimum=oracle.optimum,
                oracle_timed_out=oracle.timed_out,
                apr=apr,
                seconds=report.seconds,
            )
        )
    trajectory = _trajectory(cfg.mode, kind, named_graphs, reports, optima)
    return BenchReport(rows=rows, trajectory=trajectory, config=cfg, adapt_reports=reports)


def _trajectory(
    mode: str,
    kind: ProblemKind,
    named_graphs: list[tuple[str, Graph]],
    reports: list[AdaptReport],
    optima: dict[str, OracleResult],
) -> list[tuple[str, int, float, int]]:
    """Mean best-so-far ApR per update step over oracle-exact instances."""
    series = []
    for (name, _g), report in zip(named_graphs, reports):
        oracle = optima[name]
        if oracle.timed_out:
            continue
        series.append(
            [apr_of(kind, obj, oracle.optimum) for obj in report.combined_best_series()]
        )
    if not series:
        return []
    steps = len(series[0])
    return [
        (mode, step, float(np.mean([s[step] for s in series])), len(series))
        for step in range(steps)
    ]


# --------------------------------------------------------------------------
# Top-level commands


def run_train(cfg: RunConfig) -> dict:
    """Train per the configured mode; write checkpoint and training log."""
    if not cfg.train_dir:
        raise ValueError("config needs train_dir")
    train_set = [g for _, g in load_dataset(cfg.train_dir)]
    val_set = [g for _, g in load_dataset(cfg.val_dir)] if cfg.val_dir else None
    trainer = train_meta if cfg.meta_mode else train_egn
    result = trainer(train_set, cfg, val_set)
    chosen = result.best_params if result.best_params is not None else result.params
    log = {
        "mode": cfg.mode,
        "epochs": cfg.train_epochs,
        "epoch_mean_loss": result.epoch_mean_loss,
        "val_mean_loss": result.val_mean_loss,
        "selected": "best-validation" if result.best_params is not None else "final",
    }
    if cfg.checkpoint:
        save_parameters(chosen, cfg.checkpoint)
    if cfg.out_dir:
        out = Path(cfg.out_dir)
        out.mkdir(parents=True, exist_ok=True)
        (out / "train_log.json").write_text(json.dumps(log, indent=2))
    return log


def _load_theta(cfg: RunConfig) -> ParameterSet | None:
    if cfg.mode == "EGN-rand-FT":
        return None
    if not cfg.checkpoint:
        raise ValueError(f"mode {cfg.mode} needs a checkpoint")
    return load_parameters(cfg.checkpoint)


def run_bench(cfg: RunConfig, optima: dict[str, OracleResult] | None = None) -> BenchReport:
    if not cfg.test_dir:
        raise ValueError("config needs test_dir")
    named = load_dataset(cfg.test_dir)
    report = bench_instances(cfg, named, _load_theta(cfg), optima)
    if cfg.out_dir:
        write_bench_outputs(report, Path(cfg.out_dir))
    return report


def run_dynamic(cfg: RunConfig, params_dir: str | Path | None = None) -> BenchReport:
    """Benchmark across an ordered snapshot stream; online modes chain
    parameters from snapshot to snapshot."""
    if not cfg.snapshot_dir:
        raise ValueError("config needs snapshot_dir")
    stream = load_stream(cfg.snapshot_dir)
    named = [(f"{i:03d}", g) for i, g in enumerate(stream)]
    report = bench_instances(cfg, named, _load_theta(cfg))
    if params_dir is not None:
        params_dir = Path(params_dir)
        params_dir.mkdir(parents=True, exist_ok=True)
        for (name, _g), rep in zip(named, report.adapt_reports):
            for trace in rep.traces:
                stem = f"snap{name}_seed{trace.seed_index}"
                save_parameters(trace.start_params, params_dir / f"{stem}_start.json")
                save_parameters(trace.final_params, params_dir / f"{stem}_final.json")
    if cfg.out_dir:
        write_bench_outputs(report, Path(cfg.out_dir))
    return report


@dataclass
class SweepReport:
    cells: list[tuple[float, float, float, float, int]]  # shrink, perturb, mean, std, n
    baseline_mode: str
    baseline_mean_apr: float
    baseline_std_apr: float
    baseline_instances: int
    config: RunConfig


def run_sweep(
    cfg: RunConfig,
    shrink_grid: list[float],
    perturb_grid: list[float],
) -> SweepReport:
    """Mean ApR per (lambda_shrink, lambda_perturb) cell, plus the no-warm-start
    fine-tuning baseline. The oracle is solved once and shared by all cells."""
    if not cfg.test_dir:
        raise ValueError("config needs test_dir")
    named = load_dataset(cfg.test_dir)
    optima = compute_optima(cfg.problem, named, cfg.node_budget)
    base_mode = "MetaEGN-FT" if cfg.meta_mode else "EGN-FT"
    taco_mode = "MetaEGN-TACO" if cfg.meta_mode else "EGN-TACO"
    if not cfg.checkpoint:
        raise ValueError("sweep needs a checkpoint")
    theta = load_parameters(cfg.checkpoint)
    baseline = bench_instances(cfg.replace(mode=base_mode), named, theta, optima)
    cells = []
    for ls in shrink_grid:
        for lp in perturb_grid:
            cell_cfg = cfg.replace(mode=taco_mode, lambda_shrink=ls, lambda_perturb=lp)
            rep = bench_instances(cell_cfg, named, theta, optima)
            cells.append((ls, lp, rep.mean_apr, rep.std_apr, len(rep.aprs)))
    report = SweepReport(
        cells=cells,
        baseline_mode=base_mode,
        baseline_mean_apr=baseline.mean_apr,
        baseline_std_apr=baseline.std_apr,
        baseline_instances=len(baseline.aprs),
        config=cfg,
    )
    if cfg.out_dir:
        write_sweep_outputs(report, Path(cfg.out_dir))
    return report


# --------------------------------------------------------------------------
# Writers (formats frozen; see README)


def _fmt(x: float) -> str:
    return f"{x:.10g}"


def results_csv(report: BenchReport) -> str:
    lines = [RESULTS_CSV_HEADER]
    for r in report.rows:
        apr = "" if r.apr is None else _fmt(r.apr)
        lines.append(
            f"{r.instance},{r.mode},{r.kind},{_fmt(r.best_objective)},"
            f"{r.optimum},{int(r.oracle_timed_out)},{apr},{r.seconds:.6f}"
        )
    return "\n".join(lines) + "\n"


def trajectory_csv(report: BenchReport) -> str:
    lines = [TRAJECTORY_CSV_HEADER]
    for mode, step, mean_apr, count in report.trajectory:
        lines.append(f"{mode},{step},{_fmt(mean_apr)},{count}")
    return "\n".join(lines) + "\n"


def aggregate_markdown(report: BenchReport) -> str:
    r = report
    lines = [
        f"# Benchmark: {r.config.mode} on {r.config.problem}",
        "",
        "| mode | instances | mean ApR | std ApR | mean s/graph | oracle timeouts |",
        "| --- | --- | --- | --- | --- | --- |",
        f"| {r.config.mode} | {len(r.aprs)} | {_fmt(r.mean_apr)} | {_fmt(r.std_apr)} "
        f"| {r.mean_seconds:.3f} | {r.timeouts} |",
        "",
    ]
    return "\n".join(lines)


def write_bench_outputs(report: BenchReport, out_dir: Path) -> None:
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / "results.csv").write_text(results_csv(report))
    (out_dir / "trajectory.csv").write_text(trajectory_csv(report))
    (out_dir / "aggregate.md").write_text(aggregate_markdown(report))
    (out_dir / "config.json").write_text(report.config.to_json())
    payload = {
        "rows": [
            {
                "instance": r.instance,
                "mode": r.mode,
                "kind": r.kind,
                "best_objective": r.best_objective,
                "optimum": r.optimum,
                "oracle_timed_out": r.oracle_timed_out,
                "apr": r.apr,
                "seconds": r.seconds,
            }
            for r in report.rows
        ],
        "mean_apr": report.mean_apr,
        "std_apr": report.std_apr,
        "mean_seconds": report.mean_seconds,
        "oracle_timeouts": report.timeouts,
    }
    (out_dir / "report.json").write_text(json.dumps(payload, indent=2))
    records = [
        {"instance": row.instance, "records": rep.to_json_records()}
        for row, rep in zip(report.rows, report.adapt_reports)
    ]
    (out_dir / "adapt_records.json").write_text(json.dumps(records))


def sweep_csv(report: SweepReport) -> str:
    taco_mode = "MetaEGN-TACO" if report.config.meta_mode else "EGN-TACO"
    lines = [SWEEP_CSV_HEADER]
    for ls, lp, mean, std, n in report.cells:
        lines.append(f"{taco_mode},{_fmt(ls)},{_fmt(lp)},{_fmt(mean)},{_fmt(std)},{n}")
    lines.append(
        f"{report.baseline_mode},,,{_fmt(report.baseline_mean_apr)},"
        f"{_fmt(report.baseline_std_apr)},{report.baseline_instances}"
    )
    return "\n".join(lines) + "\n"


def write_sweep_outputs(report: SweepReport, out_dir: Path) -> None:
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / "sweep.csv").write_text(sweep_csv(report))
    (out_dir / "sweep_config.json").write_text(report.config.to_json())
