"""Sequential expectation decoding and deterministic feasibility repair.

Nodes are visited in descending probability order (ties to the lower index).
Each visit compares the expected penalized loss of fixing the node to 1
versus 0, where the expectation over still-free nodes is just substitution
of their probabilities (the losses are multilinear). The better branch is
kept, ties fix the node to 1. Because the losses are multilinear, only the
terms incident to the visited node change, so each comparison reduces to a
closed-form delta over the node's neighborhood; ``debug=True`` re-evaluates
both branches with the full loss and asserts the shortcut agrees.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .graphs import Graph
from .model import NodeProbabilities
from .objectives import (
    MC_PENALTY_ALL_PAIRS,
    MC_PENALTY_NON_EDGES,
    ProblemKind,
    Solution,
    as_kind,
    evaluate,
    loss_value,
)
from .tensor import ShapeMismatchError

# branch differences within this band are exact ties up to float noise
# (fixed 0/1 coordinates make the algebraic difference integral in beta)
TIE_TOLERANCE = 1e-9


@dataclass
class PartialAssignment:
    """State of a partially decoded solution: fixed bits plus free probabilities."""

    fixed: dict[int, int] = field(default_factory=dict)
    free: dict[int, float] = field(default_factory=dict)

    def check(self, n: int) -> None:
        keys = set(self.fixed) | set(self.free)
        if keys != set(range(n)) or set(self.fixed) & set(self.free):
            raise ValueError("fixed and free must partition the node set")
        if any(not 0 <= p <= 1 for p in self.free.values()):
            raise ValueError("free probabilities must lie in [0, 1]")

    def vector(self) -> np.ndarray:
        n = len(self.fixed) + len(self.free)
        q = np.empty(n)
        for i, b in self.fixed.items():
            q[i] = float(b)
        for i, p in self.free.items():
            q[i] = p
        return q


def _as_prob_vector(p, n: int) -> np.ndarray:
    if isinstance(p, NodeProbabilities):
        v = p.values.data.astype(np.float64)
    else:
        v = np.array(p, dtype=np.float64)  # fresh copy: decoding mutates it
    if v.shape != (n,):
        raise ShapeMismatchError(f"probability shape {v.shape} for a {n}-node graph")
    if np.any(v < 0) or np.any(v > 1):
        raise ValueError("probabilities must lie in [0, 1]")
    return v


def decode(
    kind: ProblemKind | str,
    g: Graph,
    p,
    beta: float,
    mc_penalty: str = MC_PENALTY_NON_EDGES,
    debug: bool = False,
) -> Solution:
    """Fix nodes one at a time, never worsening the expected penalized loss,
    then repair any residual infeasibility. Deterministic in (g, p)."""
    kind = as_kind(kind)
    q = _as_prob_vector(p, g.n)
    nbrs = g.neighbor_arrays()
    order = np.lexsort((np.arange(g.n), -q))
    total = float(q.sum())
    x = np.zeros(g.n, dtype=np.int64)
    state = PartialAssignment(free={i: float(q[i]) for i in range(g.n)}) if debug else None
    for i in order:
        i = int(i)
        nbr_mass = float(q[nbrs[i]].sum()) if nbrs[i].size else 0.0
        if kind is ProblemKind.MVC:
            # loss(x_i=1) - loss(x_i=0) with all other coordinates held at q
            delta = 1.0 - beta * (len(nbrs[i]) - nbr_mass)
        else:
            rest = total - float(q[i])
            penalized = rest if mc_penalty == MC_PENALTY_ALL_PAIRS else rest - nbr_mass
            delta = -nbr_mass + beta * penalized
        bit = 1 if delta <= TIE_TOLERANCE else 0
        if debug:
            q1 = q.copy()
            q1[i] = 1.0
            q0 = q.copy()
            q0[i] = 0.0
            l1 = loss_value(kind, g, q1, beta, mc_penalty)
            l0 = loss_value(kind, g, q0, beta, mc_penalty)
            lcur = loss_value(kind, g, q, beta, mc_penalty)
            chosen = l1 if bit else l0
            other = l0 if bit else l1
            assert chosen <= other + 1e-9, "decoder picked the worse branch"
            assert chosen <= lcur + 1e-9, "fixing a node worsened the expected loss"
            assert abs((l1 - l0) - delta) <= 1e-9 * max(1.0, abs(delta)), (
                "incremental delta disagrees with full evaluation"
            )
            state.fixed[i] = bit
            del state.free[i]
            state.check(g.n)
        total += bit - float(q[i])
        q[i] = float(bit)
        x[i] = bit
    x = repair(kind, g, x)
    return evaluate(kind, g, x)


def repair(kind: ProblemKind | str, g: Graph, x) -> np.ndarray:
    """Deterministically patch a binary vector until it is feasible.

    Vertex cover: repeatedly add the node covering the most currently
    uncovered edges (ties to the lower index). Clique: repeatedly drop the
    selected node with the fewest selected neighbors (ties to the higher
    index). Feasible inputs are returned unchanged.
    """
    kind = as_kind(kind)
    xv = np.asarray(x).astype(np.int64).copy()
    if xv.shape != (g.n,):
        raise ShapeMismatchError(f"solution shape {xv.shape} for a {g.n}-node graph")
    if kind is ProblemKind.MVC:
        while True:
            uncovered_deg = np.zeros(g.n, dtype=np.int64)
            found = False
            for i, j in g.edges:
                if not (xv[i] or xv[j]):
                    uncovered_deg[i] += 1
                    uncovered_deg[j] += 1
                    found = True
            if not found:
                return xv
            xv[int(np.argmax(uncovered_deg))] = 1
    while True:
        chosen = np.flatnonzero(xv)
        if len(chosen) <= 1:
            return xv
        masks = g.adjacency_masks()
        chosen_mask = 0
        for i in chosen:
            chosen_mask |= 1 << int(i)
        counts = {int(i): (masks[int(i)] & chosen_mask).bit_count() for i in chosen}
        if all(c == len(chosen) - 1 for c in counts.values()):
            return xv
        worst = min(counts.values())
        victim = max(i for i, c in counts.items() if c == worst)
        xv[victim] = 0
