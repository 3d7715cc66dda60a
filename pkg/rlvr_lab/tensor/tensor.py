"""Dense float64 tensor with a per-thread operation tape for reverse-mode gradients."""

from __future__ import annotations

import threading
from contextlib import contextmanager
from dataclasses import dataclass
from typing import Any, Callable, Iterator, Optional, Sequence

import numpy as np


class TensorError(ValueError):
    """Shape, scalar or argument violation in a tensor operation."""


class NonFiniteError(TensorError):
    """A forward operation produced NaN or Inf from finite inputs."""


BackwardFn = Callable[[np.ndarray], Sequence[Optional[np.ndarray]]]


@dataclass
class GraphNode:
    """One executed operation on the tape."""
    op: str
    inputs: tuple["Tensor", ...]
    output: "Tensor"
    backward_fn: BackwardFn


class ComputeGraph:
    """Ordered record of executed operations.

    Nodes are appended in execution order, so every node's inputs were
    produced by an earlier node or are leaves.
    """

    def __init__(self) -> None:
        self.nodes: list[GraphNode] = []

    def record(self, node: GraphNode) -> None:
        self.nodes.append(node)

    def clear(self) -> None:
        self.nodes.clear()

    def __len__(self) -> int:
        return len(self.nodes)


# Graphs are per thread; independent threads never share a tape.
_state = threading.local()


def current_graph() -> ComputeGraph:
    graph = getattr(_state, "graph", None)
    if graph is None:
        graph = ComputeGraph()
        _state.graph = graph
    return graph


def reset_graph() -> None:
    """Drop every recorded node on this thread's tape."""
    current_graph().clear()


def is_grad_enabled() -> bool:
    return getattr(_state, "grad_enabled", True)


@contextmanager
def no_grad() -> Iterator[None]:
    """Evaluate without recording operations (scoring with frozen snapshots)."""
    previous = is_grad_enabled()
    _state.grad_enabled = False
    try:
        yield
    finally:
        _state.grad_enabled = previous


class Tensor:
    """A dense real-valued array with an optional gradient buffer."""

    __slots__ = ("data", "grad", "requires_grad", "name", "_is_leaf")

    def __init__(self, data: Any, requires_grad: bool = False, name: Optional[str] = None):
        self.data = np.array(data, dtype=np.float64)
        self.grad: Optional[np.ndarray] = None
        self.requires_grad = requires_grad
        self.name = name
        self._is_leaf = True

    @classmethod
    def _from_op(cls, data: np.ndarray, requires_grad: bool) -> "Tensor":
        out = cls.__new__(cls)
        out.data = data
        out.grad = None
        out.requires_grad = requires_grad
        out.name = None
        out._is_leaf = not requires_grad
        return out

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def size(self) -> int:
        return int(self.data.size)

    @property
    def ndim(self) -> int:
        return self.data.ndim

    @property
    def is_leaf(self) -> bool:
        return self._is_leaf

    def item(self) -> float:
        if self.data.size != 1:
            raise TensorError(f"item() needs a single element, got shape {self.shape}")
        return float(self.data.reshape(-1)[0])

    def zero_grad(self) -> None:
        self.grad = None

    def backward(self, retain_graph: bool = False) -> None:
        backward(self, retain_graph=retain_graph)

    def __repr__(self) -> str:
        label = f", name={self.name!r}" if self.name else ""
        return f"Tensor(shape={self.shape}, requires_grad={self.requires_grad}{label})"

    # Arithmetic sugar; implementations live in ops.
    def __add__(self, other: Any) -> "Tensor":
        from rlvr_lab.tensor import ops
        return ops.add(self, other)

    def __radd__(self, other: Any) -> "Tensor":
        from rlvr_lab.tensor import ops
        return ops.add(other, self)

    def __sub__(self, other: Any) -> "Tensor":
        from rlvr_lab.tensor import ops
        return ops.sub(self, other)

    def __rsub__(self, other: Any) -> "Tensor":
        from rlvr_lab.tensor import ops
        return ops.sub(other, self)

    def __mul__(self, other: Any) -> "Tensor":
        from rlvr_lab.tensor import ops
        return ops.mul(self, other)

    def __rmul__(self, other: Any) -> "Tensor":
        from rlvr_lab.tensor import ops
        return ops.mul(other, self)

    def __truediv__(self, other: Any) -> "Tensor":
        from rlvr_lab.tensor import ops
        return ops.div(self, other)

    def __neg__(self) -> "Tensor":
        from rlvr_lab.tensor import ops
        return ops.neg(self)

    def __matmul__(self, other: "Tensor") -> "Tensor":
        from rlvr_lab.tensor import ops
        return ops.matmul(self, other)


def record(
    op: str,
    inputs: Sequence[Tensor],
    out_data: np.ndarray,
    backward_fn: BackwardFn,
) -> Tensor:
    """Wrap an op result, enforce finiteness and tape it when gradients are needed."""
    if not np.all(np.isfinite(out_data)):
        raise NonFiniteError(f"{op} produced non-finite values")
    needs_grad = is_grad_enabled() and any(t.requires_grad for t in inputs)
    out = Tensor._from_op(np.asarray(out_data, dtype=np.float64), needs_grad)
    if needs_grad:
        current_graph().record(GraphNode(op, tuple(inputs), out, backward_fn))
    return out


def backward(loss: Tensor, retain_graph: bool = False) -> None:
    """Accumulate d(loss)/d(leaf) into every leaf tensor with requires_grad.

    Visits tape nodes once each, newest first. Leaf gradients accumulate
    across calls until zero_grad(); the tape is cleared afterwards unless
    retain_graph is set.
    """
    if loss.size != 1:
        raise TensorError(f"backward needs a scalar loss, got shape {loss.shape}")
    if not loss.requires_grad:
        raise TensorError("loss is not connected to any tensor that requires grad")

    seed = np.ones_like(loss.data)
    if loss.is_leaf:
        loss.grad = seed if loss.grad is None else loss.grad + seed
        return

    graph = current_graph()
    pending: dict[int, np.ndarray] = {id(loss): seed}
    for node in reversed(graph.nodes):
        grad_out = pending.pop(id(node.output), None)
        if grad_out is None:
            continue
        for tensor, grad_in in zip(node.inputs, node.backward_fn(grad_out)):
            if grad_in is None or not tensor.requires_grad:
                continue
            if tensor.is_leaf:
                tensor.grad = grad_in.copy() if tensor.grad is None else tensor.grad + grad_in
            else:
                key = id(tensor)
                pending[key] = grad_in if key not in pending else pending[key] + grad_in

    if not retain_graph:
        graph.clear()
