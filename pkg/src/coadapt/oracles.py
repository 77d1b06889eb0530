"""Exact solvers and greedy baselines for vertex cover and clique.

Two independent exact routes exist on purpose: ``brute_force`` enumerates
every binary vector (vectorized over bitmask blocks), while the
``solve_exact_*`` functions run branch-and-bound. Tests cross-check them
against each other; benchmarks use branch-and-bound.

All solvers are deterministic. Bitmask convention: bit i of a mask selects
node i.
"""

from __future__ import annotations

import sys
from dataclasses import dataclass

import numpy as np

from .graphs import Graph
from .objectives import ProblemKind, Solution, as_kind, evaluate

DEFAULT_NODE_BUDGET = 10_000_000

_BRUTE_CHUNK = 1 << 18


class GraphTooLargeError(ValueError):
    """Instance exceeds the exhaustive-enumeration limit (n > 24)."""


@dataclass(frozen=True)
class OracleResult:
    optimum: int
    witness: tuple[int, ...]
    nodes_explored: int
    timed_out: bool

    def solution(self, kind: ProblemKind | str, g: Graph) -> Solution:
        return evaluate(kind, g, self.witness)


def _mask_to_vector(mask: int, n: int) -> tuple[int, ...]:
    return tuple((mask >> i) & 1 for i in range(n))


def _popcounts(arr: np.ndarray) -> np.ndarray:
    return np.unpackbits(arr.view(np.uint8)).reshape(-1, 32).sum(axis=1)


def brute_force(kind: ProblemKind | str, g: Graph) -> OracleResult:
    """Exhaustively score all 2^n binary vectors (n <= 24).

    The witness is the lowest-valued optimal bitmask, so results are
    deterministic and independent of chunking.
    """
    kind = as_kind(kind)
    if g.n > 24:
        raise GraphTooLargeError(f"brute force limited to n <= 24, got n={g.n}")
    if kind is ProblemKind.MVC:
        constraints = [np.uint32((1 << i) | (1 << j)) for i, j in g.edges]
        forbid_pairs = False
    else:
        constraints = [
            np.uint32((1 << i) | (1 << j))
            for i in range(g.n)
            for j in range(i + 1, g.n)
            if (i, j) not in g.edge_set
        ]
        forbid_pairs = True
    total = 1 << g.n
    best_count: int | None = None
    best_mask = 0
    for lo in range(0, total, _BRUTE_CHUNK):
        hi = min(lo + _BRUTE_CHUNK, total)
        arr = np.arange(lo, hi, dtype=np.uint32)
        feas = np.ones(hi - lo, dtype=bool)
        for c in constraints:
            hit = arr & c
            # cover: at least one endpoint picked; clique: never both ends of a non-edge
            feas &= (hit != c) if forbid_pairs else (hit != 0)
        idxs = np.flatnonzero(feas)
        if idxs.size == 0:
            continue
        counts = _popcounts(arr[idxs])
        pick = int(np.argmin(counts)) if kind is ProblemKind.MVC else int(np.argmax(counts))
        cnt = int(counts[pick])
        if (
            best_count is None
            or (kind is ProblemKind.MVC and cnt < best_count)
            or (kind is ProblemKind.MC and cnt > best_count)
        ):
            best_count = cnt
            best_mask = int(arr[idxs[pick]])
    assert best_count is not None  # the all-ones / empty vector is always feasible
    return OracleResult(
        optimum=best_count,
        witness=_mask_to_vector(best_mask, g.n),
        nodes_explored=total,
        timed_out=False,
    )


def _matching_lower_bound(adj: list[int], active: int) -> int:
    """Size of a greedy maximal matching; every matched edge forces one pick."""
    used = 0
    count = 0
    rest = active
    while rest:
        i = (rest & -rest).bit_length() - 1
        rest &= rest - 1
        if used >> i & 1:
            continue
        nb = adj[i] & active & ~used
        if nb:
            used |= (1 << i) | (nb & -nb)
            count += 1
    return count


def solve_exact_mvc(g: Graph, node_budget: int = DEFAULT_NODE_BUDGET) -> OracleResult:
    """Branch-and-bound minimum vertex cover.

    Branches on an endpoint v of an uncovered edge: either v joins the
    cover, or all of v's remaining neighbors must. Prunes with a greedy
    maximal-matching lower bound; starts from the degree-greedy cover.
    Budget exhaustion returns the best cover found with ``timed_out`` set.
    """
    adj = g.adjacency_masks()
    seed = greedy_mvc(g)
    best_count = seed.size
    best_mask = sum(1 << i for i, b in enumerate(seed.x) if b)
    explored = 0
    timed_out = False
    limit = sys.getrecursionlimit()
    if g.n * 3 + 200 > limit:
        sys.setrecursionlimit(g.n * 3 + 2000)

    def visit(active: int, k: int, cover: int) -> None:
        nonlocal best_count, best_mask, explored, timed_out
        if timed_out:
            return
        explored += 1
        if explored > node_budget:
            timed_out = True
            return
        # reductions: drop isolated nodes, force the neighbor of degree-1 nodes
        changed = True
        while changed:
            changed = False
            rest = active
            while rest:
                i = (rest & -rest).bit_length() - 1
                rest &= rest - 1
                if not active >> i & 1:
                    continue
                nb = adj[i] & active
                if nb == 0:
                    active &= ~(1 << i)
                elif nb & (nb - 1) == 0:
                    cover |= nb
                    k += 1
                    active &= ~((1 << i) | nb)
                    changed = True
            if k >= best_count:
                return
        if active == 0:
            if k < best_count:
                best_count = k
                best_mask = cover
            return
        if k + _matching_lower_bound(adj, active) >= best_count:
            return
        # endpoint with the most uncovered incident edges
        v, vdeg = -1, -1
        rest = active
        while rest:
            i = (rest & -rest).bit_length() - 1
            rest &= rest - 1
            d = (adj[i] & active).bit_count()
            if d > vdeg:
                v, vdeg = i, d
        nv = adj[v] & active
        visit(active & ~(1 << v), k + 1, cover | (1 << v))
        visit(active & ~((1 << v) | nv), k + nv.bit_count(), cover | nv)

    visit((1 << g.n) - 1, 0, 0)
    return OracleResult(
        optimum=best_count,
        witness=_mask_to_vector(best_mask, g.n),
        nodes_explored=explored,
        timed_out=timed_out,
    )


def solve_exact_mc(g: Graph, node_budget: int = DEFAULT_NODE_BUDGET) -> OracleResult:
    """Branch-and-bound maximum clique with a greedy-coloring upper bound.

    Starts from the seeded-greedy clique; budget exhaustion returns the best
    clique found with ``timed_out`` set.
    """
    adj = g.adjacency_masks()
    seed = greedy_mc(g)
    best_count = seed.size
    best_mask = sum(1 << i for i, b in enumerate(seed.x) if b)
    explored = 0
    timed_out = False
    limit = sys.getrecursionlimit()
    if g.n * 3 + 200 > limit:
        sys.setrecursionlimit(g.n * 3 + 2000)

    def expand(r_count: int, r_mask: int, candidates: int) -> None:
        nonlocal best_count, best_mask, explored, timed_out
        if timed_out:
            return
        explored += 1
        if explored > node_budget:
            timed_out = True
            return
        if candidates == 0:
            if r_count > best_count:
                best_count = r_count
                best_mask = r_mask
            return
        # greedy coloring: color[v] bounds the clique extendable through v
        classes: list[int] = []
        ordered: list[tuple[int, int]] = []
        rest = candidates
        while rest:
            v = (rest & -rest).bit_length() - 1
            rest &= rest - 1
            for ci, cmask in enumerate(classes):
                if adj[v] & cmask == 0:
                    classes[ci] = cmask | (1 << v)
                    ordered.append((v, ci + 1))
                    break
            else:
                classes.append(1 << v)
                ordered.append((v, len(classes)))
        pool = candidates
        for v, color in reversed(ordered):
            if r_count + color <= best_count:
                return
            expand(r_count + 1, r_mask | (1 << v), pool & adj[v])
            if timed_out:
                return
            pool &= ~(1 << v)

    expand(0, 0, (1 << g.n) - 1)
    return OracleResult(
        optimum=best_count,
        witness=_mask_to_vector(best_mask, g.n),
        nodes_explored=explored,
        timed_out=timed_out,
    )


def greedy_mvc(g: Graph) -> Solution:
    """Repeatedly cover with the highest-degree residual node (ties low)."""
    adj = g.adjacency_masks()
    active = (1 << g.n) - 1
    x = np.zeros(g.n, dtype=np.int64)
    while True:
        v, vdeg = -1, 0
        for i in range(g.n):
            if not active >> i & 1:
                continue
            d = (adj[i] & active).bit_count()
            if d > vdeg:
                v, vdeg = i, d
        if v < 0:
            break
        x[v] = 1
        active &= ~(1 << v)
    return evaluate(ProblemKind.MVC, g, x)


def greedy_mc(g: Graph) -> Solution:
    """Grow a clique from every start node, always adding the candidate with
    the most neighbors among the remaining candidates (ties low); keep the
    best over starts."""
    adj = g.adjacency_masks()
    best_mask = 0
    best_size = 0
    for start in range(g.n):
        mask = 1 << start
        size = 1
        cand = adj[start]
        while cand:
            v, vdeg = -1, -1
            rest = cand
            while rest:
                i = (rest & -rest).bit_length() - 1
                rest &= rest - 1
                d = (adj[i] & cand).bit_count()
                if d > vdeg:
                    v, vdeg = i, d
            mask |= 1 << v
            size += 1
            cand &= adj[v]
        if size > best_size:
            best_size = size
            best_mask = mask
    return evaluate(ProblemKind.MC, g, _mask_to_vector(best_mask, g.n))
