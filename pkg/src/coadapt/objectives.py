"""Penalized probabilistic losses and discrete objective/feasibility checks.

Vertex cover (minimize |cover|, every edge needs a covered endpoint):

    loss(p) = sum_i p_i + beta * sum_{(i,j) in E} (1 - p_i)(1 - p_j)

Clique (maximize |clique|, selected nodes pairwise adjacent):

    loss(p) = -sum_{(i,j) in E} p_i p_j + beta * sum over penalized pairs

where the penalized pairs are, by default, the non-adjacent pairs i < j
(selecting two non-adjacent nodes is what violates the clique constraint).
``penalty="all-pairs"`` instead penalizes every pair i < j, edges included.
Both losses sum each unordered pair once.

Both losses are multilinear in p, so their value at a probability vector
equals the expected value at the corresponding product-Bernoulli sample.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .graphs import Graph
from .model import NodeProbabilities
from .tensor import Node, ShapeMismatchError, Tape

MC_PENALTY_NON_EDGES = "non-edges"
MC_PENALTY_ALL_PAIRS = "all-pairs"
MC_PENALTIES = (MC_PENALTY_NON_EDGES, MC_PENALTY_ALL_PAIRS)


class ProblemKind(str, enum.Enum):
    MVC = "mvc"
    MC = "mc"

    @property
    def minimize(self) -> bool:
        return self is ProblemKind.MVC

    def better(self, a: float, b: float) -> bool:
        """True when objective a is strictly better than b for this kind."""
        return a < b if self.minimize else a > b


def as_kind(kind: "ProblemKind | str") -> ProblemKind:
    return kind if isinstance(kind, ProblemKind) else ProblemKind(str(kind).lower())


@dataclass(frozen=True)
class Problem:
    kind: ProblemKind
    beta: float
    mc_penalty: str = MC_PENALTY_NON_EDGES

    def __post_init__(self):
        object.__setattr__(self, "kind", as_kind(self.kind))
        if not self.beta > 0:
            raise ValueError(f"beta must be positive, got {self.beta}")
        if self.mc_penalty not in MC_PENALTIES:
            raise ValueError(f"mc_penalty must be one of {MC_PENALTIES}")


@dataclass(frozen=True)
class Solution:
    """Binary selection with its objective value and feasibility flag."""

    x: tuple[int, ...]
    objective: float
    feasible: bool

    @property
    def size(self) -> int:
        return int(sum(self.x))


def evaluate(kind: ProblemKind | str, g: Graph, x) -> Solution:
    """Objective and feasibility of a binary vector.

    Both problems use selection size as the objective; feasibility means
    every edge covered (vertex cover) or all selected nodes pairwise
    adjacent (clique).
    """
    kind = as_kind(kind)
    xv = np.asarray(x)
    if xv.shape != (g.n,):
        raise ShapeMismatchError(f"solution length {xv.shape} for a {g.n}-node graph")
    if not np.all((xv == 0) | (xv == 1)):
        raise ValueError("solution vector must be binary")
    xi = xv.astype(np.int64)
    if kind is ProblemKind.MVC:
        feasible = all(xi[i] or xi[j] for i, j in g.edges)
    else:
        chosen = np.flatnonzero(xi)
        feasible = all(
            g.has_edge(int(a), int(b))
            for idx, a in enumerate(chosen)
            for b in chosen[idx + 1 :]
        )
    return Solution(x=tuple(int(v) for v in xi), objective=float(xi.sum()), feasible=bool(feasible))


def _probability_node(p: NodeProbabilities, g: Graph, tape: Tape) -> Node:
    if p.node is None:
        raise ValueError("probabilities carry no tape node; run a recorded forward pass")
    if p.node.tape is not tape:
        raise ValueError("probabilities were recorded on a different tape")
    if len(p) != g.n:
        raise ShapeMismatchError(f"{len(p)} probabilities for a {g.n}-node graph")
    return p.node


def loss_mvc(p: NodeProbabilities, g: Graph, beta: float, tape: Tape) -> Node:
    """Differentiable cover-size-plus-uncovered-edge penalty (scalar node)."""
    if not beta > 0:
        raise ValueError("beta must be positive")
    pn = _probability_node(p, g, tape)
    total = tape.reduce_sum(pn)
    if g.m == 0:
        return total
    u, v = g.edge_arrays()
    q = tape.sub(tape.constant(1.0), pn)
    penalty = tape.reduce_sum(tape.mul(tape.gather(q, u), tape.gather(q, v)))
    return tape.add(total, tape.scale(penalty, beta))


def loss_mc(
    p: NodeProbabilities,
    g: Graph,
    beta: float,
    tape: Tape,
    penalty: str = MC_PENALTY_NON_EDGES,
) -> Node:
    """Differentiable negative-clique-mass plus constraint penalty (scalar node)."""
    if not beta > 0:
        raise ValueError("beta must be positive")
    if penalty not in MC_PENALTIES:
        raise ValueError(f"penalty must be one of {MC_PENALTIES}")
    pn = _probability_node(p, g, tape)
    s = tape.reduce_sum(pn)
    sum_sq = tape.reduce_sum(tape.mul(pn, pn))
    all_pairs = tape.scale(tape.sub(tape.mul(s, s), sum_sq), 0.5)
    if g.m:
        u, v = g.edge_arrays()
        edge_mass = tape.reduce_sum(tape.mul(tape.gather(pn, u), tape.gather(pn, v)))
    else:
        edge_mass = tape.constant(0.0)
    penalized = all_pairs if penalty == MC_PENALTY_ALL_PAIRS else tape.sub(all_pairs, edge_mass)
    return tape.add(tape.scale(edge_mass, -1.0), tape.scale(penalized, beta))


def loss_value(
    kind: ProblemKind | str,
    g: Graph,
    q,
    beta: float,
    mc_penalty: str = MC_PENALTY_NON_EDGES,
) -> float:
    """Closed-form loss at an arbitrary vector in [0, 1]^n, without a tape.

    Used by the sequential decoder (conditional expectations of a
    multilinear loss are substitutions) and by tests.
    """
    kind = as_kind(kind)
    qv = np.asarray(q, dtype=np.float64)
    if qv.shape != (g.n,):
        raise ShapeMismatchError(f"vector shape {qv.shape} for a {g.n}-node graph")
    if g.m:
        u, v = g.edge_arrays()
    if kind is ProblemKind.MVC:
        val = float(qv.sum())
        if g.m:
            val += beta * float(((1.0 - qv[u]) * (1.0 - qv[v])).sum())
        return val
    edge_mass = float((qv[u] * qv[v]).sum()) if g.m else 0.0
    all_pairs = 0.5 * (float(qv.sum()) ** 2 - float((qv * qv).sum()))
    pen = all_pairs if mc_penalty == MC_PENALTY_ALL_PAIRS else all_pairs - edge_mass
    return -edge_mass + beta * pen
