"""Differentiable operations over Tensor.

Broadcasting is limited to scalar-with-tensor. Constant numpy arrays of
the same shape are accepted wherever a Tensor operand is, and never
receive gradients.
"""

from __future__ import annotations

import math
from typing import Any, Sequence, Union

import numpy as np

from rlvr_lab.tensor.tensor import Tensor, TensorError, record

Operand = Union[Tensor, float, int, np.ndarray]

_GELU_C = math.sqrt(2.0 / math.pi)


def _lift(x: Operand) -> Tensor:
    if isinstance(x, Tensor):
        return x
    return Tensor(x)


def _pair(a: Operand, b: Operand, op: str) -> tuple[Tensor, Tensor]:
    ta, tb = _lift(a), _lift(b)
    if ta.shape != tb.shape and ta.ndim != 0 and tb.ndim != 0:
        raise TensorError(f"{op}: incompatible shapes {ta.shape} and {tb.shape}")
    return ta, tb


def _reduce_to(grad: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    if grad.shape == shape:
        return grad
    return np.asarray(grad.sum()).reshape(shape)


# ----------------------------------------------------------------------
# Elementwise
# ----------------------------------------------------------------------


def add(a: Operand, b: Operand) -> Tensor:
    ta, tb = _pair(a, b, "add")
    return record(
        "add", (ta, tb), ta.data + tb.data,
        lambda g: (_reduce_to(g, ta.shape), _reduce_to(g, tb.shape)),
    )


def sub(a: Operand, b: Operand) -> Tensor:
    ta, tb = _pair(a, b, "sub")
    return record(
        "sub", (ta, tb), ta.data - tb.data,
        lambda g: (_reduce_to(g, ta.shape), _reduce_to(-g, tb.shape)),
    )


def mul(a: Operand, b: Operand) -> Tensor:
    ta, tb = _pair(a, b, "mul")
    return record(
        "mul", (ta, tb), ta.data * tb.data,
        lambda g: (_reduce_to(g * tb.data, ta.shape), _reduce_to(g * ta.data, tb.shape)),
    )


def div(a: Operand, b: Operand) -> Tensor:
    ta, tb = _pair(a, b, "div")
    if np.any(tb.data == 0):
        raise TensorError("div: division by zero")
    return record(
        "div", (ta, tb), ta.data / tb.data,
        lambda g: (
            _reduce_to(g / tb.data, ta.shape),
            _reduce_to(-g * ta.data / (tb.data * tb.data), tb.shape),
        ),
    )


def neg(x: Tensor) -> Tensor:
    return record("neg", (x,), -x.data, lambda g: (-g,))


def scale(x: Tensor, factor: float) -> Tensor:
    return record("scale", (x,), x.data * factor, lambda g: (g * factor,))


def exp(x: Tensor) -> Tensor:
    out = np.exp(x.data)
    return record("exp", (x,), out, lambda g: (g * out,))


def expm1(x: Tensor) -> Tensor:
    """exp(x) - 1 without cancellation near zero."""
    grad = np.exp(x.data)
    return record("expm1", (x,), np.expm1(x.data), lambda g: (g * grad,))


def log(x: Tensor) -> Tensor:
    if np.any(x.data <= 0):
        raise TensorError("log of non-positive input")
    return record("log", (x,), np.log(x.data), lambda g: (g / x.data,))


def relu(x: Tensor) -> Tensor:
    mask = x.data > 0
    return record("relu", (x,), np.where(mask, x.data, 0.0), lambda g: (g * mask,))


def gelu(x: Tensor) -> Tensor:
    """Tanh-approximated GELU."""
    v = x.data
    t = np.tanh(_GELU_C * (v + 0.044715 * v ** 3))
    out = 0.5 * v * (1.0 + t)
    deriv = 0.5 * (1.0 + t) + 0.5 * v * (1.0 - t * t) * _GELU_C * (1.0 + 3 * 0.044715 * v * v)
    return record("gelu", (x,), out, lambda g: (g * deriv,))


def clamp(x: Tensor, lo: Any, hi: Any) -> Tensor:
    """Clip into [lo, hi]; gradient 1 strictly inside, 0 on or beyond a bound.

    lo and hi are constants (scalars or arrays shaped like x).
    """
    lo_arr = np.asarray(lo, dtype=np.float64)
    hi_arr = np.asarray(hi, dtype=np.float64)
    if np.any(lo_arr > hi_arr):
        raise TensorError("clamp: lower bound exceeds upper bound")
    inside = (x.data > lo_arr) & (x.data < hi_arr)
    return record("clamp", (x,), np.clip(x.data, lo_arr, hi_arr), lambda g: (g * inside,))


def minimum(a: Operand, b: Operand) -> Tensor:
    """Elementwise min; ties route the gradient to ``a``."""
    ta, tb = _pair(a, b, "minimum")
    pick_a = ta.data <= tb.data
    return record(
        "minimum", (ta, tb), np.where(pick_a, ta.data, tb.data),
        lambda g: (_reduce_to(g * pick_a, ta.shape), _reduce_to(g * ~pick_a, tb.shape)),
    )


def masked_fill(x: Tensor, mask: np.ndarray, value: float) -> Tensor:
    """Replace entries where ``mask`` is true by a constant; those entries get no gradient."""
    mask = np.asarray(mask, dtype=bool)
    if mask.shape != x.shape:
        raise TensorError(f"masked_fill: mask shape {mask.shape} != {x.shape}")
    return record("masked_fill", (x,), np.where(mask, value, x.data), lambda g: (g * ~mask,))


# ----------------------------------------------------------------------
# Reductions and structure
# ----------------------------------------------------------------------


def sum(x: Tensor) -> Tensor:  # noqa: A001 - mirrors numpy naming
    return record("sum", (x,), np.asarray(x.data.sum()), lambda g: (np.full(x.shape, float(g)),))


def mean(x: Tensor) -> Tensor:
    n = x.size
    if n == 0:
        raise TensorError("mean of empty tensor")
    return record(
        "mean", (x,), np.asarray(x.data.mean()), lambda g: (np.full(x.shape, float(g) / n),)
    )


def matmul(a: Tensor, b: Tensor) -> Tensor:
    if a.ndim != 2 or b.ndim != 2:
        raise TensorError(f"matmul needs 2-D operands, got {a.shape} and {b.shape}")
    if a.shape[1] != b.shape[0]:
        raise TensorError(f"matmul: inner dimensions differ, {a.shape} @ {b.shape}")
    return record(
        "matmul", (a, b), a.data @ b.data,
        lambda g: (g @ b.data.T, a.data.T @ g),
    )


def transpose(x: Tensor) -> Tensor:
    if x.ndim != 2:
        raise TensorError(f"transpose needs a 2-D tensor, got {x.shape}")
    return record("transpose", (x,), x.data.T.copy(), lambda g: (g.T,))


def embedding(table: Tensor, ids: Sequence[int]) -> Tensor:
    """Gather rows of ``table``; repeated ids accumulate gradient."""
    idx = np.asarray(ids, dtype=np.int64)
    if idx.ndim != 1:
        raise TensorError("embedding ids must be a flat sequence")
    if idx.size and (idx.min() < 0 or idx.max() >= table.shape[0]):
        raise TensorError(f"embedding id out of range for table with {table.shape[0]} rows")

    def _backward(g: np.ndarray) -> tuple[np.ndarray]:
        grad = np.zeros_like(table.data)
        np.add.at(grad, idx, g)
        return (grad,)

    return record("embedding", (table,), table.data[idx], _backward)


def pick(x: Tensor, ids: Sequence[int]) -> Tensor:
    """out[t] = x[t, ids[t]] for a 2-D ``x``."""
    idx = np.asarray(ids, dtype=np.int64)
    if x.ndim != 2 or idx.shape != (x.shape[0],):
        raise TensorError(f"pick: need [T x V] and T ids, got {x.shape} and {idx.shape}")
    if idx.size and (idx.min() < 0 or idx.max() >= x.shape[1]):
        raise TensorError("pick: id out of range")
    rows = np.arange(x.shape[0])

    def _backward(g: np.ndarray) -> tuple[np.ndarray]:
        grad = np.zeros_like(x.data)
        grad[rows, idx] = g
        return (grad,)

    return record("pick", (x,), x.data[rows, idx], _backward)


def slice_rows(x: Tensor, start: int, stop: int) -> Tensor:
    """x[start:stop] along the first axis."""
    if x.ndim < 1:
        raise TensorError("slice_rows needs at least one axis")

    def _backward(g: np.ndarray) -> tuple[np.ndarray]:
        grad = np.zeros_like(x.data)
        grad[start:stop] = g
        return (grad,)

    return record("slice_rows", (x,), x.data[start:stop].copy(), _backward)


def slice_cols(x: Tensor, start: int, stop: int) -> Tensor:
    if x.ndim != 2:
        raise TensorError("slice_cols needs a 2-D tensor")

    def _backward(g: np.ndarray) -> tuple[np.ndarray]:
        grad = np.zeros_like(x.data)
        grad[:, start:stop] = g
        return (grad,)

    return record("slice_cols", (x,), x.data[:, start:stop].copy(), _backward)


def concat(tensors: Sequence[Tensor], axis: int = 0) -> Tensor:
    if not tensors:
        raise TensorError("concat of an empty list")
    sizes = [t.shape[axis] for t in tensors]
    bounds = np.cumsum(sizes)[:-1]

    def _backward(g: np.ndarray) -> list[np.ndarray]:
        return np.split(g, bounds, axis=axis)

    return record("concat", tuple(tensors), np.concatenate([t.data for t in tensors], axis=axis), _backward)


# ----------------------------------------------------------------------
# Normalisation
# ----------------------------------------------------------------------


def log_softmax(x: Tensor) -> Tensor:
    """Log-softmax along the last axis with max subtraction."""
    if x.ndim == 0 or x.shape[-1] < 1:
        raise TensorError("log_softmax needs a last axis of size >= 1")
    shifted = x.data - x.data.max(axis=-1, keepdims=True)
    lse = np.log(np.exp(shifted).sum(axis=-1, keepdims=True))
    out = shifted - lse
    probs = np.exp(out)
    return record(
        "log_softmax", (x,), out,
        lambda g: (g - probs * g.sum(axis=-1, keepdims=True),),
    )


def softmax(x: Tensor) -> Tensor:
    shifted = x.data - x.data.max(axis=-1, keepdims=True)
    e = np.exp(shifted)
    out = e / e.sum(axis=-1, keepdims=True)
    return record(
        "softmax", (x,), out,
        lambda g: (out * (g - (g * out).sum(axis=-1, keepdims=True)),),
    )


def layer_norm(x: Tensor, gain: Tensor, bias: Tensor, eps: float = 1e-5) -> Tensor:
    """Row-wise layer norm of a [T x d] tensor with [d] gain and bias."""
    if x.ndim != 2 or gain.shape != (x.shape[1],) or bias.shape != (x.shape[1],):
        raise TensorError(f"layer_norm shapes: x {x.shape}, gain {gain.shape}, bias {bias.shape}")
    d = x.shape[1]
    mu = x.data.mean(axis=1, keepdims=True)
    centered = x.data - mu
    inv = 1.0 / np.sqrt((centered * centered).mean(axis=1, keepdims=True) + eps)
    xhat = centered * inv

    def _backward(g: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        dxhat = g * gain.data
        dx = (inv / d) * (
            d * dxhat
            - dxhat.sum(axis=1, keepdims=True)
            - xhat * (dxhat * xhat).sum(axis=1, keepdims=True)
        )
        return dx, (g * xhat).sum(axis=0), g.sum(axis=0)

    return record("layer_norm", (x, gain, bias), xhat * gain.data + bias.data, _backward)
