"""Experiment configuration: one flat record of every knob a run needs.

Configs load from JSON and accept field-by-field overrides (the CLI maps
flags onto them). Defaults follow the shipped experiment presets: penalty
weights 0.5 (vertex cover) and 4.0 (clique) for training, 0.5 for tuning;
tuning rates 1e-4 for vertex cover and 1e-3 for clique backbones trained
for generalization, 1e-3 for meta-trained backbones; shrink 0.3 with
online shrink 0.99 for static runs (dynamic runs conventionally use 0.5
and 1.0); perturbation scale 0.001 with unit noise variance.
"""

from __future__ import annotations

import json
import os
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

MODES = (
    "EGN",
    "EGN-FT",
    "EGN-rand-FT",
    "EGN-TACO",
    "EGN-TACO-Online",
    "MetaEGN",
    "MetaEGN-FT",
    "MetaEGN-TACO",
    "MetaEGN-TACO-Online",
)

WORKERS_ENV = "COADAPT_WORKERS"


@dataclass
class RunConfig:
    problem: str = "mvc"
    mode: str = "EGN-TACO"
    beta_train: float | None = None  # per-problem default when None
    beta_tune: float = 0.5
    d_in: int = 16
    d: int = 16
    layers: int = 4
    eps_learnable: bool = False
    mc_penalty: str = "non-edges"
    train_epochs: int = 20
    train_lr: float = 1e-3
    meta_inner_steps: int = 1
    meta_inner_lr: float = 1e-3
    tune_steps: int = 30
    tune_lr: float | None = None  # per-problem/backbone default when None
    seeds: int = 4
    lambda_shrink: float = 0.3
    lambda_perturb: float = 0.001
    lambda_shrink_online: float = 0.99
    sigma: float = 1.0
    node_budget: int = 10_000_000
    master_seed: int = 0
    timing: bool = True
    workers: int | None = None  # None -> COADAPT_WORKERS env var, else 1
    init_seed: int = 0  # fresh-parameter draw for training
    train_dir: str | None = None
    val_dir: str | None = None
    test_dir: str | None = None
    snapshot_dir: str | None = None
    checkpoint: str | None = None
    out_dir: str | None = None

    def __post_init__(self):
        if self.problem not in ("mvc", "mc"):
            raise ValueError(f"problem must be 'mvc' or 'mc', got {self.problem!r}")
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}, got {self.mode!r}")
        if self.seeds < 1:
            raise ValueError("seeds must be >= 1")
        if self.tune_steps < 0:
            raise ValueError("tune_steps must be >= 0")
        if self.train_epochs < 0:
            raise ValueError("train_epochs must be >= 0")
        if self.meta_inner_steps < 0:
            raise ValueError("meta_inner_steps must be >= 0")
        if not (0 <= self.lambda_shrink <= 1):
            raise ValueError("lambda_shrink must be in [0, 1]")
        if not (0 <= self.lambda_shrink_online <= 1):
            raise ValueError("lambda_shrink_online must be in [0, 1]")
        if not (0 <= self.lambda_perturb < 1):
            raise ValueError("lambda_perturb must be in [0, 1)")
        if not self.sigma > 0:
            raise ValueError("sigma must be positive")

    @property
    def resolved_beta_train(self) -> float:
        if self.beta_train is not None:
            return self.beta_train
        return 0.5 if self.problem == "mvc" else 4.0

    @property
    def resolved_tune_lr(self) -> float:
        if self.tune_lr is not None:
            return self.tune_lr
        if self.mode.startswith("MetaEGN"):
            return 1e-3
        return 1e-4 if self.problem == "mvc" else 1e-3

    @property
    def resolved_workers(self) -> int:
        if self.workers is not None:
            return max(1, self.workers)
        return max(1, int(os.environ.get(WORKERS_ENV, "1")))

    @property
    def meta_mode(self) -> bool:
        return self.mode.startswith("MetaEGN")

    @property
    def online_mode(self) -> bool:
        return self.mode.endswith("-Online")

    def replace(self, **updates) -> "RunConfig":
        data = asdict(self)
        data.update(updates)
        return RunConfig(**data)

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2, sort_keys=True)

    @classmethod
    def from_dict(cls, data: dict) -> "RunConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        return cls(**data)

    @classmethod
    def from_json_file(cls, path: str | Path, overrides: dict | None = None) -> "RunConfig":
        data = json.loads(Path(path).read_text())
        if overrides:
            data.update(overrides)
        return cls.from_dict(data)
