"""Unsupervised graph neural solvers for minimum vertex cover and maximum
clique, with shrink-and-perturb test-time adaptation, exact oracles, greedy
baselines, and an approximation-ratio benchmark harness."""

from .adapt import (
    AdamState,
    AdaptReport,
    SpParams,
    StepRecord,
    adam_step,
    fine_tune,
    init_adam,
    shrink_perturb,
    taco_adapt,
    taco_online,
    train_egn,
    train_meta,
)
from .config import MODES, RunConfig
from .decoding import PartialAssignment, decode, repair
from .graphs import (
    Graph,
    GraphParseError,
    GraphValidationError,
    RbParams,
    SnapshotStream,
    generate_dynamic,
    generate_er,
    generate_rb,
    load_graph,
    load_stream,
    save_graph,
    save_stream,
)
from .model import (
    NodeProbabilities,
    ParameterSet,
    forward,
    init_parameters,
    load_parameters,
    make_input,
    save_parameters,
)
from .objectives import Problem, ProblemKind, Solution, evaluate, loss_mc, loss_mvc, loss_value
from .oracles import (
    OracleResult,
    brute_force,
    greedy_mc,
    greedy_mvc,
    solve_exact_mc,
    solve_exact_mvc,
)
from .tensor import Tape, Tensor, backward

__version__ = "0.1.0"
