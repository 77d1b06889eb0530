"""Command-line front end.

Subcommands: generate | train | bench | dynamic | sweep | solve-exact.
Every run command accepts ``--config FILE`` (JSON with RunConfig fields);
explicit flags override file values. Worker count can also come from the
``COADAPT_WORKERS`` environment variable.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .bench import run_bench, run_dynamic, run_sweep, run_train
from .config import MODES, RunConfig
from .datasets import generate_snapshot_dataset, generate_static_dataset
from .graphs import load_graph
from .oracles import DEFAULT_NODE_BUDGET, solve_exact_mc, solve_exact_mvc


def _add_config_arguments(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="JSON file with RunConfig fields")
    p.add_argument("--problem", choices=["mvc", "mc"])
    p.add_argument("--mode", choices=list(MODES))
    p.add_argument("--beta-train", type=float, dest="beta_train")
    p.add_argument("--beta-tune", type=float, dest="beta_tune")
    p.add_argument("--d-in", type=int, dest="d_in")
    p.add_argument("--d", type=int, dest="d")
    p.add_argument("--layers", type=int)
    p.add_argument("--mc-penalty", choices=["non-edges", "all-pairs"], dest="mc_penalty")
    p.add_argument("--train-epochs", type=int, dest="train_epochs")
    p.add_argument("--train-lr", type=float, dest="train_lr")
    p.add_argument("--meta-inner-steps", type=int, dest="meta_inner_steps")
    p.add_argument("--meta-inner-lr", type=float, dest="meta_inner_lr")
    p.add_argument("--tune-steps", type=int, dest="tune_steps")
    p.add_argument("--tune-lr", type=float, dest="tune_lr")
    p.add_argument("--seeds", type=int)
    p.add_argument("--lambda-shrink", type=float, dest="lambda_shrink")
    p.add_argument("--lambda-perturb", type=float, dest="lambda_perturb")
    p.add_argument("--lambda-shrink-online", type=float, dest="lambda_shrink_online")
    p.add_argument("--sigma", type=float)
    p.add_argument("--node-budget", type=int, dest="node_budget")
    p.add_argument("--master-seed", type=int, dest="master_seed")
    p.add_argument("--init-seed", type=int, dest="init_seed")
    p.add_argument("--workers", type=int)
    p.add_argument(
        "--no-timing",
        action="store_true",
        help="record zero wall-clock everywhere, making outputs byte-reproducible",
    )
    p.add_argument("--train-dir", dest="train_dir")
    p.add_argument("--val-dir", dest="val_dir")
    p.add_argument("--test-dir", dest="test_dir")
    p.add_argument("--snapshot-dir", dest="snapshot_dir")
    p.add_argument("--checkpoint")
    p.add_argument("--out-dir", dest="out_dir")


_CONFIG_FIELDS = (
    "problem", "mode", "beta_train", "beta_tune", "d_in", "d", "layers", "mc_penalty",
    "train_epochs", "train_lr", "meta_inner_steps", "meta_inner_lr", "tune_steps",
    "tune_lr", "seeds", "lambda_shrink", "lambda_perturb", "lambda_shrink_online",
    "sigma", "node_budget", "master_seed", "init_seed", "workers",
    "train_dir", "val_dir", "test_dir", "snapshot_dir", "checkpoint", "out_dir",
)


def _collect_overrides(args: argparse.Namespace) -> dict:
    overrides = {
        name: getattr(args, name)
        for name in _CONFIG_FIELDS
        if getattr(args, name, None) is not None
    }
    if getattr(args, "no_timing", False):
        overrides["timing"] = False
    return overrides


def _build_config(args: argparse.Namespace, extra: dict | None = None) -> RunConfig:
    overrides = _collect_overrides(args)
    if extra:
        for key, value in extra.items():
            overrides.setdefault(key, value)
    if args.config:
        file_data = json.loads(Path(args.config).read_text())
        file_data.update(overrides)
        return RunConfig.from_dict(file_data)
    return RunConfig.from_dict(overrides)


def _file_has(args: argparse.Namespace, key: str) -> bool:
    if not args.config:
        return False
    return key in json.loads(Path(args.config).read_text())


def cmd_generate(args: argparse.Namespace) -> int:
    if args.snapshots is not None:
        manifest = generate_snapshot_dataset(
            args.out,
            snapshots=args.snapshots,
            flip_rate=args.flip_rate,
            master_seed=args.master_seed,
            n=args.n,
            edge_prob=args.edge_prob,
        )
    else:
        manifest = generate_static_dataset(
            args.out,
            generator=args.generator,
            counts={"train": args.train, "val": args.val, "test": args.test},
            master_seed=args.master_seed,
            k=args.k,
            a=args.a,
            p_train_range=(args.p_train_min, args.p_train_max),
            p_test=args.p_test,
            n=args.n,
            edge_prob=args.edge_prob,
        )
    print(f"wrote dataset to {args.out} ({manifest['generator']})")
    return 0


def cmd_train(args: argparse.Namespace) -> int:
    cfg = _build_config(args)
    log = run_train(cfg)
    losses = log["epoch_mean_loss"]
    if losses:
        print(f"trained {cfg.mode} for {len(losses)} epochs: "
              f"mean loss {losses[0]:.4f} -> {losses[-1]:.4f}")
    if cfg.checkpoint:
        print(f"checkpoint: {cfg.checkpoint}")
    return 0


def cmd_bench(args: argparse.Namespace) -> int:
    cfg = _build_config(args)
    report = run_bench(cfg)
    print(
        f"{cfg.mode} {cfg.problem}: mean ApR {report.mean_apr:.5f} "
        f"± {report.std_apr:.5f} over {len(report.aprs)} instances "
        f"({report.timeouts} oracle timeouts, {report.mean_seconds:.2f} s/graph)"
    )
    if cfg.out_dir:
        print(f"outputs: {cfg.out_dir}")
    return 0


def cmd_dynamic(args: argparse.Namespace) -> int:
    extra = {}
    if not _file_has(args, "lambda_shrink") and args.lambda_shrink is None:
        extra["lambda_shrink"] = 0.5
    if not _file_has(args, "lambda_shrink_online") and args.lambda_shrink_online is None:
        extra["lambda_shrink_online"] = 1.0
    cfg = _build_config(args, extra)
    report = run_dynamic(cfg, params_dir=args.params_dir)
    print(
        f"{cfg.mode} {cfg.problem} over {len(report.rows)} snapshots: "
        f"mean ApR {report.mean_apr:.5f} ± {report.std_apr:.5f} "
        f"({report.timeouts} oracle timeouts)"
    )
    return 0


def cmd_sweep(args: argparse.Namespace) -> int:
    cfg = _build_config(args)
    shrink = [float(v) for v in args.shrink_grid.split(",")]
    perturb = [float(v) for v in args.perturb_grid.split(",")]
    report = run_sweep(cfg, shrink, perturb)
    print(f"{len(report.cells)} cells; baseline {report.baseline_mode} "
          f"mean ApR {report.baseline_mean_apr:.5f}")
    for ls, lp, mean, _std, _n in report.cells:
        print(f"  shrink={ls:g} perturb={lp:g}: mean ApR {mean:.5f}")
    return 0


def cmd_solve_exact(args: argparse.Namespace) -> int:
    g = load_graph(args.graph)
    solver = solve_exact_mvc if args.problem == "mvc" else solve_exact_mc
    result = solver(g, args.node_budget)
    chosen = [i for i, b in enumerate(result.witness) if b]
    print(f"problem: {args.problem}")
    print(f"optimum: {result.optimum}")
    print(f"witness: {' '.join(map(str, chosen)) if chosen else '(empty)'}")
    print(f"nodes explored: {result.nodes_explored}")
    print(f"timed out: {str(result.timed_out).lower()}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="coadapt",
        description="Unsupervised GNN solvers for vertex cover and clique "
        "with shrink-and-perturb test-time adaptation.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", help="write a dataset directory")
    p.add_argument("--out", required=True)
    p.add_argument("--generator", choices=["rb", "er"], default="rb")
    p.add_argument("--train", type=int, default=0)
    p.add_argument("--val", type=int, default=0)
    p.add_argument("--test", type=int, default=0)
    p.add_argument("--master-seed", type=int, default=0, dest="master_seed")
    p.add_argument("--k", type=int, default=6)
    p.add_argument("--a", type=float, default=1.26)
    p.add_argument("--p-train-min", type=float, default=0.3, dest="p_train_min")
    p.add_argument("--p-train-max", type=float, default=1.0, dest="p_train_max")
    p.add_argument("--p-test", type=float, default=0.25, dest="p_test")
    p.add_argument("--n", type=int, default=30)
    p.add_argument("--edge-prob", type=float, default=0.3, dest="edge_prob")
    p.add_argument("--snapshots", type=int, default=None,
                   help="write a snapshot stream instead of train/val/test splits")
    p.add_argument("--flip-rate", type=float, default=0.05, dest="flip_rate")
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("train", help="train a model and write a checkpoint")
    _add_config_arguments(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("bench", help="benchmark a mode on a static test set")
    _add_config_arguments(p)
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("dynamic", help="benchmark a mode across a snapshot stream")
    _add_config_arguments(p)
    p.add_argument("--params-dir", dest="params_dir",
                   help="dump per-snapshot start/final parameter checkpoints here")
    p.set_defaults(func=cmd_dynamic)

    p = sub.add_parser("sweep", help="grid-sweep warm-start coefficients")
    _add_config_arguments(p)
    p.add_argument("--shrink-grid", default="0,0.1,0.3,0.5,0.9,1",
                   dest="shrink_grid", help="comma-separated lambda_shrink values")
    p.add_argument("--perturb-grid", default="0,0.001,0.01,0.1",
                   dest="perturb_grid", help="comma-separated lambda_perturb values")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("solve-exact", help="run the exact solver on one graph")
    p.add_argument("--graph", required=True)
    p.add_argument("--problem", choices=["mvc", "mc"], required=True)
    p.add_argument("--node-budget", type=int, default=DEFAULT_NODE_BUDGET, dest="node_budget")
    p.set_defaults(func=cmd_solve_exact)

    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
