"""Dense float64 tensors with explicit-tape reverse-mode differentiation.

The primitive set is deliberately small: matmul, add, sub, mul, relu,
sigmoid, reduce_sum, gather (with scatter-add backward), and a neighbor
aggregation over a graph's adjacency. That is everything the message-passing
network, the penalized losses, and the optimizer need.

A Tape records operations in execution order; backward() walks the record
once in reverse, so gradient accumulation order is fixed and results are
bitwise reproducible.
"""

from __future__ import annotations

from typing import Callable, Sequence

import numpy as np

from .graphs import Graph


class ShapeMismatchError(ValueError):
    """Operand shapes incompatible for the requested primitive."""


class NonfiniteValueError(ValueError):
    """NaN or Inf encountered in tensor data or an operation result."""


class NonScalarLossError(ValueError):
    """backward() called on a node that is not a scalar."""


def _as_float64(data) -> np.ndarray:
    return np.array(data, dtype=np.float64)


def _check_finite(arr: np.ndarray, context: str) -> None:
    if not np.all(np.isfinite(arr)):
        raise NonfiniteValueError(f"non-finite value in {context}")


class Tensor:
    """Immutable dense float64 array; rejects NaN/Inf at construction."""

    __slots__ = ("_data",)

    def __init__(self, data):
        arr = _as_float64(data)
        _check_finite(arr, "tensor construction")
        arr.setflags(write=False)
        self._data = arr

    @property
    def data(self) -> np.ndarray:
        return self._data

    @property
    def shape(self) -> tuple[int, ...]:
        return self._data.shape

    def copy_data(self) -> np.ndarray:
        return self._data.copy()

    def __repr__(self) -> str:
        return f"Tensor(shape={self.shape})"

    def __eq__(self, other: object) -> bool:
        return isinstance(other, Tensor) and np.array_equal(self._data, other._data)

    def __getstate__(self):
        return self._data.copy()

    def __setstate__(self, state):
        arr = np.asarray(state, dtype=np.float64)
        arr.setflags(write=False)
        self._data = arr


class Node:
    """Handle to a value recorded on a tape."""

    __slots__ = ("tape", "index", "value")

    def __init__(self, tape: "Tape", index: int, value: np.ndarray):
        self.tape = tape
        self.index = index
        self.value = value

    @property
    def shape(self) -> tuple[int, ...]:
        return self.value.shape


class _Entry:
    __slots__ = ("out", "inputs", "backward")

    def __init__(
        self,
        out: Node,
        inputs: Sequence[Node],
        backward: Callable[[np.ndarray], list[np.ndarray]],
    ):
        self.out = out
        self.inputs = tuple(inputs)
        self.backward = backward


class Tape:
    """Ordered record of primitive operations for one forward pass."""

    def __init__(self):
        self._entries: list[_Entry] = []
        self._params: dict[str, Node] = {}
        self._next = 0

    def _node(self, value: np.ndarray) -> Node:
        node = Node(self, self._next, value)
        self._next += 1
        return node

    def _record(self, value, inputs, backward, opname: str) -> Node:
        value = np.asarray(value, dtype=np.float64)
        _check_finite(value, opname)
        node = self._node(value)
        self._entries.append(_Entry(node, inputs, backward))
        return node

    def _own(self, *nodes: Node) -> None:
        for nd in nodes:
            if nd.tape is not self:
                raise ValueError("node belongs to a different tape")

    # leaves ---------------------------------------------------------------

    def parameter(self, name: str, tensor: Tensor) -> Node:
        """Register a leaf that backward() will report a gradient for."""
        if name in self._params:
            raise ValueError(f"duplicate parameter name {name!r}")
        node = self._node(tensor.data)
        self._params[name] = node
        return node

    def constant(self, value) -> Node:
        arr = _as_float64(value)
        _check_finite(arr, "constant")
        return self._node(arr)

    @property
    def parameters(self) -> dict[str, Node]:
        return dict(self._params)

    @property
    def num_ops(self) -> int:
        return len(self._entries)

    # primitives -----------------------------------------------------------

    def matmul(self, a: Node, b: Node) -> Node:
        self._own(a, b)
        av, bv = a.value, b.value
        if av.ndim != 2 or bv.ndim not in (1, 2) or av.shape[1] != bv.shape[0]:
            raise ShapeMismatchError(f"matmul {av.shape} @ {bv.shape}")

        def back(g: np.ndarray) -> list[np.ndarray]:
            if bv.ndim == 1:
                return [np.outer(g, bv), av.T @ g]
            return [g @ bv.T, av.T @ g]

        return self._record(av @ bv, (a, b), back, "matmul")

    def _ewise_shapes(self, av: np.ndarray, bv: np.ndarray, op: str) -> None:
        if av.shape == bv.shape:
            return
        if av.shape == () or bv.shape == ():
            return
        # row-vector bias broadcast onto a matrix
        if av.ndim == 2 and bv.ndim == 1 and av.shape[1] == bv.shape[0]:
            return
        raise ShapeMismatchError(f"{op} {av.shape} vs {bv.shape}")

    @staticmethod
    def _reduce_to(g: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
        if g.shape == shape:
            return g
        if shape == ():
            return np.asarray(g.sum())
        # matrix grad reduced onto a broadcast row vector
        return g.sum(axis=0)

    def add(self, a: Node, b: Node) -> Node:
        self._own(a, b)
        self._ewise_shapes(a.value, b.value, "add")
        ash, bsh = a.value.shape, b.value.shape

        def back(g: np.ndarray) -> list[np.ndarray]:
            return [self._reduce_to(g, ash), self._reduce_to(g, bsh)]

        return self._record(a.value + b.value, (a, b), back, "add")

    def sub(self, a: Node, b: Node) -> Node:
        self._own(a, b)
        self._ewise_shapes(a.value, b.value, "sub")
        ash, bsh = a.value.shape, b.value.shape

        def back(g: np.ndarray) -> list[np.ndarray]:
            return [self._reduce_to(g, ash), -self._reduce_to(g, bsh)]

        return self._record(a.value - b.value, (a, b), back, "sub")

    def mul(self, a: Node, b: Node) -> Node:
        self._own(a, b)
        av, bv = a.value, b.value
        if av.shape != bv.shape and av.shape != () and bv.shape != ():
            raise ShapeMismatchError(f"mul {av.shape} vs {bv.shape}")

        def back(g: np.ndarray) -> list[np.ndarray]:
            return [self._reduce_to(g * bv, av.shape), self._reduce_to(g * av, bv.shape)]

        return self._record(av * bv, (a, b), back, "mul")

    def scale(self, a: Node, c: float) -> Node:
        return self.mul(a, self.constant(float(c)))

    def relu(self, a: Node) -> Node:
        self._own(a)
        mask = a.value > 0

        def back(g: np.ndarray) -> list[np.ndarray]:
            return [g * mask]

        return self._record(np.where(mask, a.value, 0.0), (a,), back, "relu")

    def sigmoid(self, a: Node) -> Node:
        self._own(a)
        x = a.value
        out = np.empty_like(x)
        pos = x >= 0
        out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
        ex = np.exp(x[~pos])
        out[~pos] = ex / (1.0 + ex)

        def back(g: np.ndarray) -> list[np.ndarray]:
            return [g * out * (1.0 - out)]

        return self._record(out, (a,), back, "sigmoid")

    def reduce_sum(self, a: Node) -> Node:
        self._own(a)
        shape = a.value.shape

        def back(g: np.ndarray) -> list[np.ndarray]:
            return [np.full(shape, float(g))]

        return self._record(a.value.sum(), (a,), back, "reduce_sum")

    def gather(self, a: Node, indices: np.ndarray) -> Node:
        """Select rows (2-D input) or elements (1-D input); backward scatters."""
        self._own(a)
        idx = np.asarray(indices, dtype=np.intp)
        if idx.ndim != 1:
            raise ShapeMismatchError("gather indices must be 1-D")
        if a.value.ndim not in (1, 2):
            raise ShapeMismatchError("gather input must be 1-D or 2-D")
        shape = a.value.shape

        def back(g: np.ndarray) -> list[np.ndarray]:
            grad = np.zeros(shape, dtype=np.float64)
            np.add.at(grad, idx, g)
            return [grad]

        return self._record(a.value[idx], (a,), back, "gather")

    def neighbor_aggregate(self, a: Node, g: Graph) -> Node:
        """Row i of the output is the sum of input rows over i's neighbors."""
        self._own(a)
        if a.value.shape[0] != g.n:
            raise ShapeMismatchError(
                f"features have {a.value.shape[0]} rows for a {g.n}-node graph"
            )
        adj = g.dense_adjacency()

        def back(gr: np.ndarray) -> list[np.ndarray]:
            return [adj @ gr]  # adjacency is symmetric

        return self._record(adj @ a.value, (a,), back, "neighbor_aggregate")


def backward(tape: Tape, loss: Node) -> dict[str, Tensor]:
    """Gradients of a scalar loss for every parameter leaf on the tape.

    Parameters the loss does not depend on receive zero gradients.
    """
    if loss.tape is not tape:
        raise ValueError("loss node belongs to a different tape")
    if loss.value.shape != ():
        raise NonScalarLossError(f"loss must be scalar, got shape {loss.value.shape}")
    grads: dict[int, np.ndarray] = {loss.index: np.asarray(1.0)}
    for entry in reversed(tape._entries):
        gout = grads.get(entry.out.index)
        if gout is None:
            continue
        for node, gin in zip(entry.inputs, entry.backward(gout)):
            acc = grads.get(node.index)
            grads[node.index] = gin if acc is None else acc + gin
    return {
        name: Tensor(grads.get(node.index, np.zeros(node.value.shape)))
        for name, node in tape._params.items()
    }
