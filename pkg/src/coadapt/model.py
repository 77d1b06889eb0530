"""Message-passing backbone: stacked GIN layers plus a sigmoid node head.

Each layer computes h' = MLP((1 + eps) * h + sum_{j in N(i)} h_j) with a
two-layer ReLU MLP; a linear head plus sigmoid maps the final embedding to a
per-node selection probability. Inputs are random one-hot rows keyed on
(input seed, node index), so streams of graphs that share node indices see
consistent features under one seed.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .graphs import Graph
from .tensor import Node, ShapeMismatchError, Tape, Tensor

CHECKPOINT_FORMAT = "coadapt-params-v1"


@dataclass
class ParameterSet:
    """All network weights, keyed by name, plus the widths they imply.

    Tensor layout per layer L (0-based): ``ginL.w1`` (fan_in x d), ``ginL.b1``
    (d), ``ginL.w2`` (d x d), ``ginL.b2`` (d), ``ginL.eps`` (scalar); head
    weights ``head.w`` (d) and ``head.b`` (scalar). ``eps`` tensors are only
    trained when ``eps_learnable`` is set.
    """

    d_in: int
    d: int
    layers: int
    eps_learnable: bool
    tensors: dict[str, Tensor] = field(default_factory=dict)

    def copy(self) -> "ParameterSet":
        return ParameterSet(
            d_in=self.d_in,
            d=self.d,
            layers=self.layers,
            eps_learnable=self.eps_learnable,
            tensors={k: Tensor(v.data) for k, v in self.tensors.items()},
        )

    def trainable_names(self) -> list[str]:
        if self.eps_learnable:
            return list(self.tensors)
        return [k for k in self.tensors if not k.endswith(".eps")]

    def allclose(self, other: "ParameterSet", atol: float = 0.0) -> bool:
        if set(self.tensors) != set(other.tensors):
            return False
        return all(
            np.allclose(self.tensors[k].data, other.tensors[k].data, atol=atol, rtol=0)
            for k in self.tensors
        )

    def equal_bits(self, other: "ParameterSet") -> bool:
        return set(self.tensors) == set(other.tensors) and all(
            np.array_equal(self.tensors[k].data, other.tensors[k].data)
            for k in self.tensors
        )


@dataclass(frozen=True)
class NodeProbabilities:
    """Per-node Bernoulli probabilities; keeps the tape node when produced
    by a recorded forward pass so losses can differentiate through it."""

    values: Tensor
    node: Node | None = None

    def __post_init__(self):
        p = self.values.data
        if p.ndim != 1:
            raise ShapeMismatchError(f"probabilities must be a vector, got {p.shape}")
        if np.any(p < 0) or np.any(p > 1):
            raise ValueError("probabilities must lie in [0, 1]")

    def __len__(self) -> int:
        return self.values.data.shape[0]


def init_parameters(
    d_in: int,
    d: int,
    rng_seed: int,
    layers: int = 4,
    eps_learnable: bool = False,
) -> ParameterSet:
    """Fresh weights: uniform fan-in-scaled draws, zero biases, zero eps."""
    if d_in < 1 or d < 1 or layers < 1:
        raise ValueError("d_in, d, and layers must all be >= 1")
    rng = np.random.default_rng(rng_seed)
    tensors: dict[str, Tensor] = {}
    for layer in range(layers):
        fan_in = d_in if layer == 0 else d
        bound1 = 1.0 / np.sqrt(fan_in)
        bound2 = 1.0 / np.sqrt(d)
        tensors[f"gin{layer}.w1"] = Tensor(rng.uniform(-bound1, bound1, (fan_in, d)))
        tensors[f"gin{layer}.b1"] = Tensor(np.zeros(d))
        tensors[f"gin{layer}.w2"] = Tensor(rng.uniform(-bound2, bound2, (d, d)))
        tensors[f"gin{layer}.b2"] = Tensor(np.zeros(d))
        tensors[f"gin{layer}.eps"] = Tensor(0.0)
    tensors["head.w"] = Tensor(rng.uniform(-1.0 / np.sqrt(d), 1.0 / np.sqrt(d), d))
    tensors["head.b"] = Tensor(0.0)
    return ParameterSet(
        d_in=d_in, d=d, layers=layers, eps_learnable=eps_learnable, tensors=tensors
    )


def make_input(g: Graph, seed: int, d_in: int) -> Tensor:
    """Random one-hot feature rows; row i's hot slot is keyed on (seed, i)."""
    if d_in < 1:
        raise ValueError("d_in must be >= 1")
    x = np.zeros((g.n, d_in))
    for i in range(g.n):
        rng = np.random.default_rng(np.random.SeedSequence((seed, i)))
        x[i, int(rng.integers(d_in))] = 1.0
    return Tensor(x)


def forward(params: ParameterSet, g: Graph, x: Tensor, tape: Tape) -> NodeProbabilities:
    """Run the network on the tape and return per-node probabilities."""
    if x.shape != (g.n, params.d_in):
        raise ShapeMismatchError(
            f"input shape {x.shape} does not match (n={g.n}, d_in={params.d_in})"
        )
    trainable = set(params.trainable_names())
    leaf: dict[str, Node] = {}
    for name in params.tensors:
        if name in trainable:
            leaf[name] = tape.parameter(name, params.tensors[name])
        else:
            leaf[name] = tape.constant(params.tensors[name].data)
    h = tape.constant(x.data)
    one = tape.constant(1.0)
    for layer in range(params.layers):
        agg = tape.neighbor_aggregate(h, g)
        scaled = tape.mul(h, tape.add(one, leaf[f"gin{layer}.eps"]))
        pre = tape.add(scaled, agg)
        hidden = tape.relu(tape.add(tape.matmul(pre, leaf[f"gin{layer}.w1"]), leaf[f"gin{layer}.b1"]))
        h = tape.add(tape.matmul(hidden, leaf[f"gin{layer}.w2"]), leaf[f"gin{layer}.b2"])
    logits = tape.add(tape.matmul(h, leaf["head.w"]), leaf["head.b"])
    p = tape.sigmoid(logits)
    return NodeProbabilities(values=Tensor(p.value), node=p)


def save_parameters(params: ParameterSet, path: str | Path) -> None:
    """Write a JSON checkpoint; float64 values survive the round trip exactly."""
    payload = {
        "format": CHECKPOINT_FORMAT,
        "d_in": params.d_in,
        "d": params.d,
        "layers": params.layers,
        "eps_learnable": params.eps_learnable,
        "tensors": {
            name: {"shape": list(t.shape), "data": t.data.ravel().tolist()}
            for name, t in params.tensors.items()
        },
    }
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(payload))


def load_parameters(path: str | Path) -> ParameterSet:
    payload = json.loads(Path(path).read_text())
    if payload.get("format") != CHECKPOINT_FORMAT:
        raise ValueError(f"unrecognized checkpoint format in {path}")
    tensors = {
        name: Tensor(np.array(spec["data"], dtype=np.float64).reshape(spec["shape"]))
        for name, spec in payload["tensors"].items()
    }
    return ParameterSet(
        d_in=payload["d_in"],
        d=payload["d"],
        layers=payload["layers"],
        eps_learnable=payload["eps_learnable"],
        tensors=tensors,
    )
