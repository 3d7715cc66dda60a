"""Adam and global-norm gradient clipping over named parameter arrays."""

from dataclasses import dataclass, field
from typing import Dict, Optional

import numpy as np

from rlvr_lab.policy.model import PolicyParams


class OptimizerError(ValueError):
    """Update refused, e.g. a non-finite gradient."""


@dataclass
class AdamState:
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step: int = 0
    m: Dict[str, np.ndarray] = field(default_factory=dict)
    v: Dict[str, np.ndarray] = field(default_factory=dict)


def global_norm(grads: Dict[str, np.ndarray]) -> float:
    return float(np.sqrt(sum(float(np.sum(g * g)) for g in grads.values())))


def clip_grad_norm(grads: Dict[str, np.ndarray], max_norm: Optional[float]) -> float:
    """Scale grads in place so their global norm is at most max_norm; returns the pre-clip norm."""
    norm = global_norm(grads)
    if max_norm is not None and norm > max_norm:
        scale = max_norm / norm
        for g in grads.values():
            g *= scale
    return norm


def optimizer_step(
    params: PolicyParams,
    grads: Dict[str, np.ndarray],
    lr: float,
    state: AdamState,
) -> AdamState:
    """One bias-corrected Adam update, applied in place.

    Every gradient is checked before any parameter moves, so a refused
    step leaves params and state untouched. Missing names count as zero
    gradients.
    """
    for name, g in grads.items():
        if not np.all(np.isfinite(g)):
            raise OptimizerError(f"non-finite gradient for {name}; step refused")

    state.step += 1
    t = state.step
    c1 = 1.0 - state.beta1 ** t
    c2 = 1.0 - state.beta2 ** t
    for name, tensor in params.named_tensors():
        g = grads.get(name)
        if g is None:
            g = np.zeros_like(tensor.data)
        m = state.m.get(name)
        v = state.v.get(name)
        m = state.beta1 * m + (1.0 - state.beta1) * g if m is not None else (1.0 - state.beta1) * g
        v = state.beta2 * v + (1.0 - state.beta2) * g * g if v is not None else (1.0 - state.beta2) * g * g
        state.m[name], state.v[name] = m, v
        tensor.data -= lr * (m / c1) / (np.sqrt(v / c2) + state.eps)
    return state
