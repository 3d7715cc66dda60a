"""Central finite-difference helpers for verifying gradients."""

from __future__ import annotations

from typing import Callable, Iterable, Optional

import numpy as np

from rlvr_lab.tensor.tensor import Tensor, no_grad

DEFAULT_STEP = 1e-5
ABS_FLOOR = 1e-6


def numerical_gradient(
    fn: Callable[[], float],
    tensor: Tensor,
    step: float = DEFAULT_STEP,
    indices: Optional[Iterable[tuple[int, ...]]] = None,
) -> np.ndarray:
    """Estimate d fn / d tensor by central differences.

    ``fn`` re-evaluates the scalar objective from the current tensor
    values. Only ``indices`` are perturbed when given; the rest of the
    returned array is zero.
    """
    grad = np.zeros_like(tensor.data)
    coords = list(indices) if indices is not None else list(np.ndindex(tensor.shape))
    with no_grad():
        for idx in coords:
            original = tensor.data[idx]
            tensor.data[idx] = original + step
            plus = fn()
            tensor.data[idx] = original - step
            minus = fn()
            tensor.data[idx] = original
            grad[idx] = (plus - minus) / (2.0 * step)
    return grad


def relative_error(analytic: np.ndarray, numeric: np.ndarray, floor: float = ABS_FLOOR) -> float:
    """max |a - n| / max(max |a|, max |n|, floor) over the whole array."""
    a = np.asarray(analytic, dtype=np.float64)
    n = np.asarray(numeric, dtype=np.float64)
    if a.size == 0:
        return 0.0
    scale = max(float(np.max(np.abs(a))), float(np.max(np.abs(n))), floor)
    return float(np.max(np.abs(a - n))) / scale
