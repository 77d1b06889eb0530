"""Parameter-space optimization: Adam, distribution training, meta training,
instance fine-tuning, shrink-and-perturb warm starts, and online chaining.

Warm starting replaces a trained parameter vector theta by

    lambda_shrink * theta + lambda_perturb * noise,   noise ~ N(0, sigma^2)

before instance-wise gradient updates: shrinking relaxes distribution-level
biases while keeping their direction, the perturbation adds exploration.
The online variant feeds each instance's adapted parameters (after a fresh
shrink-and-perturb) into the next instance of a stream.

Determinism: every random draw is keyed on (master_seed, purpose, instance
tag, seed index) via :mod:`coadapt.rngs`, so any run unit can be recomputed
in isolation and whole pipelines are pure functions of their config.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from .config import RunConfig
from .decoding import decode
from .graphs import Graph, SnapshotStream
from .model import NodeProbabilities, ParameterSet, forward, init_parameters, make_input
from .objectives import Problem, ProblemKind, Solution, loss_mc, loss_mvc
from .rngs import derive_seed
from .tensor import NonfiniteValueError, ShapeMismatchError, Tape, Tensor, backward

ADAM_BETA1 = 0.9
ADAM_BETA2 = 0.999
ADAM_EPS = 1e-8

# purpose tags for seed derivation (stable across releases; reports depend on them)
TAG_TUNE_INPUT = "tune-input"
TAG_SP = "sp"
TAG_RAND_INIT = "rand-init"
TAG_TRAIN_INPUT = "train-input"
TAG_TRAIN_SHUFFLE = "train-shuffle"
TAG_VAL_INPUT = "val-input"


def tune_input_seed(master_seed: int, instance_tag: int, seed_index: int) -> int:
    return derive_seed(master_seed, TAG_TUNE_INPUT, instance_tag, seed_index)


def sp_draw_seed(master_seed: int, instance_tag: int, seed_index: int) -> int:
    return derive_seed(master_seed, TAG_SP, instance_tag, seed_index)


def rand_init_seed(master_seed: int, instance_tag: int, seed_index: int) -> int:
    return derive_seed(master_seed, TAG_RAND_INIT, instance_tag, seed_index)


# --------------------------------------------------------------------------
# Adam


@dataclass
class AdamState:
    lr: float
    beta1: float = ADAM_BETA1
    beta2: float = ADAM_BETA2
    eps: float = ADAM_EPS
    t: int = 0
    m: dict[str, np.ndarray] = field(default_factory=dict)
    v: dict[str, np.ndarray] = field(default_factory=dict)

    def copy(self) -> "AdamState":
        return AdamState(
            lr=self.lr,
            beta1=self.beta1,
            beta2=self.beta2,
            eps=self.eps,
            t=self.t,
            m={k: a.copy() for k, a in self.m.items()},
            v={k: a.copy() for k, a in self.v.items()},
        )


def init_adam(params: ParameterSet, lr: float) -> AdamState:
    state = AdamState(lr=lr)
    for name in params.trainable_names():
        shape = params.tensors[name].shape
        state.m[name] = np.zeros(shape)
        state.v[name] = np.zeros(shape)
    return state


def adam_step(
    params: ParameterSet, grads: dict[str, Tensor], state: AdamState
) -> ParameterSet:
    """One bias-corrected Adam update. Returns fresh parameters; the moment
    state is advanced in place."""
    state.t += 1
    out = params.copy()
    for name in params.trainable_names():
        if name not in grads:
            raise ShapeMismatchError(f"missing gradient for parameter {name!r}")
        g = grads[name].data
        theta = params.tensors[name].data
        if g.shape != theta.shape:
            raise ShapeMismatchError(
                f"gradient shape {g.shape} vs parameter shape {theta.shape} for {name!r}"
            )
        if not np.all(np.isfinite(g)):
            raise NonfiniteValueError(f"non-finite gradient for {name!r}")
        m = state.m[name] = state.beta1 * state.m[name] + (1 - state.beta1) * g
        v = state.v[name] = state.beta2 * state.v[name] + (1 - state.beta2) * g * g
        m_hat = m / (1 - state.beta1**state.t)
        v_hat = v / (1 - state.beta2**state.t)
        out.tensors[name] = Tensor(theta - state.lr * m_hat / (np.sqrt(v_hat) + state.eps))
    return out


def sgd_step(params: ParameterSet, grads: dict[str, Tensor], lr: float) -> ParameterSet:
    out = params.copy()
    for name in params.trainable_names():
        out.tensors[name] = Tensor(params.tensors[name].data - lr * grads[name].data)
    return out


# --------------------------------------------------------------------------
# Shrink and perturb


@dataclass(frozen=True)
class SpParams:
    """Warm-start transform coefficients.

    (1, 0) is the exact identity and (lambda, 0) is exact elementwise
    scaling; no random numbers are drawn when lambda_perturb is zero.
    """

    lambda_shrink: float
    lambda_perturb: float
    sigma: float = 1.0
    rng_seed: int = 0

    def __post_init__(self):
        if not (0 <= self.lambda_shrink <= 1):
            raise ValueError("lambda_shrink must be in [0, 1]")
        if not (0 <= self.lambda_perturb < 1):
            raise ValueError("lambda_perturb must be in [0, 1)")
        if not self.sigma > 0:
            raise ValueError("sigma must be positive")

    def with_seed(self, rng_seed: int) -> "SpParams":
        return SpParams(self.lambda_shrink, self.lambda_perturb, self.sigma, rng_seed)


def shrink_perturb(theta: ParameterSet, sp: SpParams) -> ParameterSet:
    """Fresh parameters lambda_shrink * theta + lambda_perturb * noise.

    Noise draws are keyed on sp.rng_seed and visit tensors in name order;
    the input is never modified. Only trainable tensors are transformed.
    """
    out = theta.copy()
    if sp.lambda_shrink == 1.0 and sp.lambda_perturb == 0.0:
        return out
    rng = np.random.default_rng(sp.rng_seed)
    for name in theta.trainable_names():
        data = theta.tensors[name].data
        if sp.lambda_shrink != 1.0:
            data = data * sp.lambda_shrink
        if sp.lambda_perturb != 0.0:
            data = data + sp.lambda_perturb * rng.normal(0.0, sp.sigma, data.shape)
        out.tensors[name] = Tensor(data)
    return out


# --------------------------------------------------------------------------
# Instance adaptation


@dataclass(frozen=True)
class StepRecord:
    step: int
    loss: float
    objective: float
    feasible: bool
    millis: float


@dataclass
class SeedTrace:
    """Adaptation trajectory of one input seed on one instance."""

    seed_index: int
    input_seed: int
    records: list[StepRecord]
    best_solution: Solution
    best_step: int
    start_params: ParameterSet
    final_params: ParameterSet

    def objectives(self) -> list[float]:
        return [r.objective for r in self.records]


@dataclass
class AdaptReport:
    """All seed trajectories on one instance plus the best decoded solution."""

    kind: ProblemKind
    traces: list[SeedTrace]
    best: Solution
    best_seed: int
    best_step: int
    seconds: float

    def steps(self) -> int:
        return len(self.traces[0].records) - 1

    def best_so_far_series(self, seed_index: int) -> list[float]:
        """Monotone best-so-far objective per step for one seed."""
        kind = self.kind
        out: list[float] = []
        cur: float | None = None
        for r in self.traces[seed_index].records:
            if cur is None or kind.better(r.objective, cur):
                cur = r.objective
            out.append(cur)
        return out

    def combined_best_series(self) -> list[float]:
        """Best-so-far objective per step across all seeds."""
        per_seed = [self.best_so_far_series(s) for s in range(len(self.traces))]
        out = []
        for step_vals in zip(*per_seed):
            best = step_vals[0]
            for v in step_vals[1:]:
                if self.kind.better(v, best):
                    best = v
            out.append(best)
        return out

    def to_json_records(self) -> list[dict]:
        return [
            {
                "seed": t.seed_index,
                "step": r.step,
                "loss": r.loss,
                "objective": r.objective,
                "feasible": r.feasible,
                "millis": r.millis,
            }
            for t in self.traces
            for r in t.records
        ]


def _instance_loss(problem: Problem, p: NodeProbabilities, g: Graph, tape: Tape):
    if problem.kind is ProblemKind.MVC:
        return loss_mvc(p, g, problem.beta, tape)
    return loss_mc(p, g, problem.beta, tape, penalty=problem.mc_penalty)


def _tune_single(
    theta_start: ParameterSet,
    g: Graph,
    problem: Problem,
    steps: int,
    lr: float,
    seed_index: int,
    input_seed: int,
    timing: bool,
) -> SeedTrace:
    params = theta_start.copy()
    x = make_input(g, input_seed, params.d_in)
    adam = init_adam(params, lr)
    records: list[StepRecord] = []
    best_solution: Solution | None = None
    best_step = 0
    pending = None
    for step in range(steps + 1):
        t0 = time.perf_counter() if timing else 0.0
        if step > 0:
            params = adam_step(params, pending, adam)
        tape = Tape()
        p = forward(params, g, x, tape)
        loss_node = _instance_loss(problem, p, g, tape)
        if step < steps:
            pending = backward(tape, loss_node)
        sol = decode(problem.kind, g, p, problem.beta, mc_penalty=problem.mc_penalty)
        millis = (time.perf_counter() - t0) * 1000.0 if timing else 0.0
        records.append(
            StepRecord(
                step=step,
                loss=float(loss_node.value),
                objective=sol.objective,
                feasible=sol.feasible,
                millis=millis,
            )
        )
        if best_solution is None or problem.kind.better(sol.objective, best_solution.objective):
            best_solution = sol
            best_step = step
    return SeedTrace(
        seed_index=seed_index,
        input_seed=input_seed,
        records=records,
        best_solution=best_solution,
        best_step=best_step,
        start_params=theta_start,
        final_params=params,
    )


def _assemble_report(kind: ProblemKind, traces: list[SeedTrace], seconds: float) -> AdaptReport:
    best_seed = 0
    for s, tr in enumerate(traces):
        if kind.better(tr.best_solution.objective, traces[best_seed].best_solution.objective):
            best_seed = s
    best_trace = traces[best_seed]
    return AdaptReport(
        kind=kind,
        traces=traces,
        best=best_trace.best_solution,
        best_seed=best_seed,
        best_step=best_trace.best_step,
        seconds=seconds,
    )


def fine_tune(
    theta0: ParameterSet,
    g: Graph,
    problem: Problem,
    cfg: RunConfig,
    instance_tag: int = 0,
    sp: SpParams | None = None,
    start_overrides: dict[int, ParameterSet] | None = None,
) -> AdaptReport:
    """Per input seed: copy (or warm-start) theta0, run ``cfg.tune_steps``
    Adam updates of the instance loss, decode after every step, and report
    the best solution over seeds and steps.

    ``sp`` enables the shrink-and-perturb warm start, drawn independently
    per seed. ``start_overrides`` substitutes per-seed starting parameters
    (used by online chaining) before the warm start is applied.
    """
    t0 = time.perf_counter() if cfg.timing else 0.0
    traces: list[SeedTrace] = []
    for seed_index in range(cfg.seeds):
        base = theta0
        if start_overrides and seed_index in start_overrides:
            base = start_overrides[seed_index]
        if sp is not None:
            draw = sp.with_seed(sp_draw_seed(cfg.master_seed, instance_tag, seed_index))
            start = shrink_perturb(base, draw)
        else:
            start = base.copy()
        traces.append(
            _tune_single(
                start,
                g,
                problem,
                cfg.tune_steps,
                cfg.resolved_tune_lr,
                seed_index,
                tune_input_seed(cfg.master_seed, instance_tag, seed_index),
                cfg.timing,
            )
        )
    seconds = time.perf_counter() - t0 if cfg.timing else 0.0
    return _assemble_report(problem.kind, traces, seconds)


def taco_adapt(
    theta: ParameterSet,
    g: Graph,
    sp: SpParams,
    problem: Problem,
    cfg: RunConfig,
    instance_tag: int = 0,
) -> AdaptReport:
    """Shrink-and-perturb warm start followed by instance fine-tuning."""
    return fine_tune(theta, g, problem, cfg, instance_tag=instance_tag, sp=sp)


def taco_online(
    theta: ParameterSet,
    stream: SnapshotStream | list[Graph],
    sp_first: SpParams,
    sp_online: SpParams,
    problem: Problem,
    cfg: RunConfig,
) -> list[AdaptReport]:
    """Adapt along a stream, re-warm-starting each instance from the previous
    instance's adapted parameters (chains are independent per seed)."""
    graphs = list(stream)
    if not graphs:
        raise ValueError("stream must be non-empty")
    reports: list[AdaptReport] = []
    current: dict[int, ParameterSet] = {}
    for idx, g in enumerate(graphs):
        sp = sp_first if idx == 0 else sp_online
        report = fine_tune(
            theta,
            g,
            problem,
            cfg,
            instance_tag=idx,
            sp=sp,
            start_overrides=current if idx > 0 else None,
        )
        current = {t.seed_index: t.final_params for t in report.traces}
        reports.append(report)
    return reports


# --------------------------------------------------------------------------
# Distribution-level training


@dataclass
class TrainResult:
    params: ParameterSet
    best_params: ParameterSet | None
    epoch_mean_loss: list[float]
    val_mean_loss: list[float]


def _validation_loss(params: ParameterSet, val_set: list[Graph], problem: Problem, cfg: RunConfig) -> float:
    total = 0.0
    for idx, g in enumerate(val_set):
        tape = Tape()
        x = make_input(g, derive_seed(cfg.master_seed, TAG_VAL_INPUT, idx), cfg.d_in)
        p = forward(params, g, x, tape)
        total += float(_instance_loss(problem, p, g, tape).value)
    return total / len(val_set)


def train_egn(
    train_set: list[Graph],
    cfg: RunConfig,
    val_set: list[Graph] | None = None,
    problem: Problem | None = None,
) -> TrainResult:
    """Distribution-level training: one Adam step per instance visit, inputs
    resampled per visit, instance order reshuffled per epoch."""
    return _train(train_set, cfg, val_set, problem, meta=False)


def train_meta(
    train_set: list[Graph],
    cfg: RunConfig,
    val_set: list[Graph] | None = None,
    problem: Problem | None = None,
) -> TrainResult:
    """First-order meta training: every instance is a task; the outer Adam
    update applies the gradient evaluated after ``cfg.meta_inner_steps``
    plain gradient steps from the current parameters (the input seed is
    fixed within a task). With zero inner steps this reduces exactly to
    :func:`train_egn`."""
    return _train(train_set, cfg, val_set, problem, meta=True)


def _train(
    train_set: list[Graph],
    cfg: RunConfig,
    val_set: list[Graph] | None,
    problem: Problem | None,
    meta: bool,
) -> TrainResult:
    if not train_set:
        raise ValueError("training set must be non-empty")
    if problem is None:
        problem = Problem(cfg.problem, cfg.resolved_beta_train, cfg.mc_penalty)
    params = init_parameters(
        cfg.d_in, cfg.d, cfg.init_seed, layers=cfg.layers, eps_learnable=cfg.eps_learnable
    )
    adam = init_adam(params, cfg.train_lr)
    epoch_mean_loss: list[float] = []
    val_mean_loss: list[float] = []
    best_params: ParameterSet | None = None
    best_val = np.inf
    for epoch in range(cfg.train_epochs):
        order = np.arange(len(train_set))
        shuffle_rng = np.random.default_rng(
            derive_seed(cfg.master_seed, TAG_TRAIN_SHUFFLE, epoch)
        )
        shuffle_rng.shuffle(order)
        losses = []
        for pos, inst in enumerate(order):
            g = train_set[int(inst)]
            input_seed = derive_seed(cfg.master_seed, TAG_TRAIN_INPUT, epoch, int(inst))
            x = make_input(g, input_seed, cfg.d_in)
            task_params = params
            if meta:
                for _ in range(cfg.meta_inner_steps):
                    tape = Tape()
                    p = forward(task_params, g, x, tape)
                    grads = backward(tape, _instance_loss(problem, p, g, tape))
                    task_params = sgd_step(task_params, grads, cfg.meta_inner_lr)
            tape = Tape()
            p = forward(task_params, g, x, tape)
            loss_node = _instance_loss(problem, p, g, tape)
            grads = backward(tape, loss_node)
            params = adam_step(params, grads, adam)
            losses.append(float(loss_node.value))
        epoch_mean_loss.append(float(np.mean(losses)))
        if val_set:
            vl = _validation_loss(params, val_set, problem, cfg)
            val_mean_loss.append(vl)
            if vl < best_val:
                best_val = vl
                best_params = params.copy()
    return TrainResult(
        params=params,
        best_params=best_params,
        epoch_mean_loss=epoch_mean_loss,
        val_mean_loss=val_mean_loss,
    )
