"""Deterministic seed derivation for per-step and per-sample random streams."""

import numpy as np

# Stream tags keep independent consumers of one master seed apart.
INIT_STREAM = 0
ROLLOUT_STREAM = 1
SHUFFLE_STREAM = 2
EVAL_STREAM = 3


def derive_seed(*keys: int) -> int:
    """Hash a tuple of non-negative integers into a 32-bit seed.

    Identical keys always give the same seed, and changing any key gives
    an unrelated stream (SeedSequence mixing).
    """
    if not keys:
        raise ValueError("derive_seed needs at least one key")
    return int(np.random.SeedSequence([int(k) for k in keys]).generate_state(1)[0])
