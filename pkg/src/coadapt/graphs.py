"""Undirected simple graphs, random instance generators, and edge-list I/O.

The edge-list text format (used by the CLI, datasets, and tests):

    # optional comment lines start with '#'
    <n>
    <i> <j>        one edge per line, 0 <= i < j < n

Snapshot streams are directories of edge-list files named ``000.el``,
``001.el``, ... where lexicographic order is time order.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np


class GraphParseError(ValueError):
    """Malformed edge-list input (bad token, bad line shape)."""


class GraphValidationError(ValueError):
    """Structurally invalid graph data (self-loop, index out of range)."""


class Graph:
    """Immutable undirected simple graph on nodes 0..n-1.

    Edges are stored canonically as (i, j) with i < j; adjacency lists are
    sorted. Instances are safe to share across threads and processes.
    """

    def __init__(self, n: int, edges: Iterable[tuple[int, int]]):
        if not isinstance(n, int) or n < 1:
            raise GraphValidationError(f"node count must be an integer >= 1, got {n!r}")
        canon = set()
        for i, j in edges:
            i, j = int(i), int(j)
            if i == j:
                raise GraphValidationError(f"self-loop at node {i}")
            if not (0 <= i < n and 0 <= j < n):
                raise GraphValidationError(f"edge ({i}, {j}) out of range for n={n}")
            canon.add((i, j) if i < j else (j, i))
        self._n = n
        self._edges = tuple(sorted(canon))
        nbrs: list[list[int]] = [[] for _ in range(n)]
        for i, j in self._edges:
            nbrs[i].append(j)
            nbrs[j].append(i)
        self._adjacency = tuple(tuple(sorted(a)) for a in nbrs)
        self._cache: dict[str, object] = {}

    @property
    def n(self) -> int:
        return self._n

    @property
    def edges(self) -> tuple[tuple[int, int], ...]:
        return self._edges

    @property
    def m(self) -> int:
        return len(self._edges)

    @property
    def adjacency(self) -> tuple[tuple[int, ...], ...]:
        return self._adjacency

    def degree(self, i: int) -> int:
        return len(self._adjacency[i])

    def has_edge(self, i: int, j: int) -> bool:
        if i == j:
            return False
        a, b = (i, j) if i < j else (j, i)
        return (a, b) in self.edge_set

    @property
    def edge_set(self) -> frozenset[tuple[int, int]]:
        if "edge_set" not in self._cache:
            self._cache["edge_set"] = frozenset(self._edges)
        return self._cache["edge_set"]  # type: ignore[return-value]

    def edge_arrays(self) -> tuple[np.ndarray, np.ndarray]:
        """Edge endpoints as two parallel int arrays (canonical i < j order)."""
        if "edge_arrays" not in self._cache:
            if self._edges:
                u = np.array([e[0] for e in self._edges], dtype=np.intp)
                v = np.array([e[1] for e in self._edges], dtype=np.intp)
            else:
                u = np.empty(0, dtype=np.intp)
                v = np.empty(0, dtype=np.intp)
            self._cache["edge_arrays"] = (u, v)
        return self._cache["edge_arrays"]  # type: ignore[return-value]

    def neighbor_arrays(self) -> tuple[np.ndarray, ...]:
        if "neighbor_arrays" not in self._cache:
            self._cache["neighbor_arrays"] = tuple(
                np.array(a, dtype=np.intp) for a in self._adjacency
            )
        return self._cache["neighbor_arrays"]  # type: ignore[return-value]

    def dense_adjacency(self) -> np.ndarray:
        """Symmetric 0/1 adjacency matrix as float64 (cached)."""
        if "dense" not in self._cache:
            a = np.zeros((self._n, self._n), dtype=np.float64)
            if self._edges:
                u, v = self.edge_arrays()
                a[u, v] = 1.0
                a[v, u] = 1.0
            self._cache["dense"] = a
        return self._cache["dense"]  # type: ignore[return-value]

    def adjacency_masks(self) -> list[int]:
        """Per-node neighbor bitmask (node j set in mask[i] iff edge (i, j))."""
        if "masks" not in self._cache:
            masks = [0] * self._n
            for i, j in self._edges:
                masks[i] |= 1 << j
                masks[j] |= 1 << i
            self._cache["masks"] = masks
        return self._cache["masks"]  # type: ignore[return-value]

    def complement(self) -> "Graph":
        comp = [
            (i, j)
            for i in range(self._n)
            for j in range(i + 1, self._n)
            if (i, j) not in self.edge_set
        ]
        return Graph(self._n, comp)

    def relabel(self, perm: Sequence[int]) -> "Graph":
        """New graph where old node i becomes perm[i]."""
        return Graph(self._n, [(perm[i], perm[j]) for i, j in self._edges])

    def __eq__(self, other: object) -> bool:
        return (
            isinstance(other, Graph)
            and self._n == other._n
            and self._edges == other._edges
        )

    def __hash__(self) -> int:
        return hash((self._n, self._edges))

    def __repr__(self) -> str:
        return f"Graph(n={self._n}, m={self.m})"

    def __getstate__(self):
        return {"n": self._n, "edges": self._edges}

    def __setstate__(self, state):
        self.__init__(state["n"], state["edges"])


@dataclass(frozen=True)
class SnapshotStream:
    """Ordered sequence of graph snapshots, optionally timestamped."""

    snapshots: tuple[Graph, ...]
    timestamps: tuple[int, ...] | None = None

    def __post_init__(self):
        object.__setattr__(self, "snapshots", tuple(self.snapshots))
        if not self.snapshots:
            raise GraphValidationError("snapshot stream must be non-empty")
        if self.timestamps is not None:
            ts = tuple(int(t) for t in self.timestamps)
            object.__setattr__(self, "timestamps", ts)
            if len(ts) != len(self.snapshots):
                raise GraphValidationError("timestamps must match snapshot count")
            if any(b <= a for a, b in zip(ts, ts[1:])):
                raise GraphValidationError("timestamps must strictly increase")

    def __len__(self) -> int:
        return len(self.snapshots)

    def __iter__(self):
        return iter(self.snapshots)


@dataclass(frozen=True)
class RbParams:
    """Parameters of the clique-bundle hard-instance generator.

    The generated graph has k cliques of size s = ceil(k**a), so exactly
    k * ceil(k**a) nodes. ``p`` controls cross-clique edge density (lower p
    near the generator's phase transition gives harder instances).
    """

    k: int
    a: float
    p: float
    rng_seed: int = 0

    def __post_init__(self):
        if self.k < 2:
            raise ValueError(f"k must be >= 2, got {self.k}")
        if not self.a > 0:
            raise ValueError(f"a must be positive, got {self.a}")
        if not (0 < self.p <= 1):
            raise ValueError(f"p must be in (0, 1], got {self.p}")

    @property
    def clique_size(self) -> int:
        return math.ceil(self.k**self.a)

    @property
    def node_count(self) -> int:
        return self.k * self.clique_size


def generate_rb(params: RbParams) -> Graph:
    """Generate a forced-satisfiable clique-bundle instance.

    Construction (k = params.k, s = ceil(k**a), n = k*s):
      1. Nodes [c*s, (c+1)*s) form clique c; all intra-clique edges present.
      2. One planted node per clique is chosen at random; the planted set
         stays an independent set of size k by construction.
      3. For round(r * k * ln k) rounds with r = -a / ln(1 - p) (r = 0 when
         p = 1), pick two distinct cliques and add round(p * s^2) distinct
         cross-clique edges at random, never joining two planted nodes.

    Deterministic given params.rng_seed.
    """
    rng = np.random.default_rng(params.rng_seed)
    k, s = params.k, params.clique_size
    n = params.node_count
    edges: set[tuple[int, int]] = set()
    for c in range(k):
        base = c * s
        for i in range(s):
            for j in range(i + 1, s):
                edges.add((base + i, base + j))
    planted = [c * s + int(rng.integers(s)) for c in range(k)]
    if params.p >= 1.0:
        rounds = 0
    else:
        r = -params.a / math.log1p(-params.p)
        rounds = round(r * k * math.log(k))
    per_round = min(round(params.p * s * s), s * s - 1)
    for _ in range(rounds):
        c1, c2 = rng.choice(k, size=2, replace=False)
        c1, c2 = int(c1), int(c2)
        allowed = [
            (c1 * s + i, c2 * s + j)
            for i in range(s)
            for j in range(s)
            if (c1 * s + i, c2 * s + j) != (planted[c1], planted[c2])
        ]
        picks = rng.choice(len(allowed), size=per_round, replace=False)
        for idx in picks:
            u, v = allowed[int(idx)]
            edges.add((u, v) if u < v else (v, u))
    return Graph(n, edges)


def generate_er(n: int, edge_prob: float, rng_seed: int = 0) -> Graph:
    """Erdos-Renyi G(n, p): each unordered pair kept independently."""
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    if not (0 <= edge_prob <= 1):
        raise ValueError(f"edge_prob must be in [0, 1], got {edge_prob}")
    rng = np.random.default_rng(rng_seed)
    edges = [
        (i, j)
        for i in range(n)
        for j in range(i + 1, n)
        if rng.random() < edge_prob
    ]
    return Graph(n, edges)


def generate_dynamic(
    base: Graph, steps: int, flip_rate: float, rng_seed: int = 0
) -> SnapshotStream:
    """Stream of ``steps`` snapshots; snapshot 0 is ``base``, each later one
    toggles every potential edge of its predecessor independently with
    probability ``flip_rate``."""
    if steps < 1:
        raise ValueError(f"steps must be >= 1, got {steps}")
    if not (0 <= flip_rate <= 1):
        raise ValueError(f"flip_rate must be in [0, 1], got {flip_rate}")
    rng = np.random.default_rng(rng_seed)
    snapshots = [base]
    current = set(base.edges)
    pairs = [(i, j) for i in range(base.n) for j in range(i + 1, base.n)]
    for _ in range(steps - 1):
        if flip_rate > 0:
            flips = rng.random(len(pairs)) < flip_rate
            current = {e for e, f in zip(pairs, flips) if (e in current) != f}
        snapshots.append(Graph(base.n, current))
    return SnapshotStream(tuple(snapshots))


def remap_node_ids(pairs: Iterable[tuple[object, object]]) -> tuple[Graph, dict[object, int]]:
    """Build a graph from edges over arbitrary hashable node ids.

    Ids are assigned dense 0-based indices in first-seen order; the mapping
    is returned so it can be persisted alongside the converted dataset.
    """
    mapping: dict[object, int] = {}
    edges: list[tuple[int, int]] = []
    for a, b in pairs:
        for node in (a, b):
            if node not in mapping:
                mapping[node] = len(mapping)
        edges.append((mapping[a], mapping[b]))
    if not mapping:
        raise GraphValidationError("no edges to ingest")
    return Graph(len(mapping), edges), mapping


def save_graph(g: Graph, path: str | Path) -> None:
    path = Path(path)
    lines = [str(g.n)]
    lines.extend(f"{i} {j}" for i, j in g.edges)
    path.write_text("\n".join(lines) + "\n")


def load_graph(path: str | Path) -> Graph:
    path = Path(path)
    text = path.read_text()
    n: int | None = None
    edges: list[tuple[int, int]] = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if n is None:
            try:
                n = int(line)
            except ValueError:
                raise GraphParseError(
                    f"{path}:{lineno}: expected node count, got {line!r}"
                ) from None
            if n < 1:
                raise GraphValidationError(f"{path}:{lineno}: node count must be >= 1")
            continue
        parts = line.split()
        if len(parts) != 2:
            raise GraphParseError(
                f"{path}:{lineno}: expected 'i j', got {line!r}"
            )
        try:
            i, j = int(parts[0]), int(parts[1])
        except ValueError:
            raise GraphParseError(
                f"{path}:{lineno}: non-integer endpoint in {line!r}"
            ) from None
        if i == j:
            raise GraphValidationError(f"{path}:{lineno}: self-loop at node {i}")
        if not (i < j):
            raise GraphParseError(f"{path}:{lineno}: endpoints must satisfy i < j")
        if not (0 <= i and j < n):
            raise GraphValidationError(
                f"{path}:{lineno}: edge ({i}, {j}) out of range for n={n}"
            )
        edges.append((i, j))
    if n is None:
        raise GraphParseError(f"{path}: missing node-count line")
    return Graph(n, edges)


def save_stream(stream: SnapshotStream, directory: str | Path) -> None:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    for idx, g in enumerate(stream.snapshots):
        save_graph(g, directory / f"{idx:03d}.el")


def load_stream(directory: str | Path) -> SnapshotStream:
    directory = Path(directory)
    files = sorted(directory.glob("*.el"))
    if not files:
        raise FileNotFoundError(f"no .el snapshot files in {directory}")
    return SnapshotStream(tuple(load_graph(f) for f in files))
