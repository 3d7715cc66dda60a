"""Minimal dense tensors with reverse-mode gradients."""

from rlvr_lab.tensor.tensor import (
    ComputeGraph,
    NonFiniteError,
    Tensor,
    TensorError,
    backward,
    current_graph,
    is_grad_enabled,
    no_grad,
    reset_graph,
)
from rlvr_lab.tensor.gradcheck import numerical_gradient, relative_error

__all__ = [
    "ComputeGraph",
    "NonFiniteError",
    "Tensor",
    "TensorError",
    "backward",
    "current_graph",
    "is_grad_enabled",
    "no_grad",
    "reset_graph",
    "numerical_gradient",
    "relative_error",
]
