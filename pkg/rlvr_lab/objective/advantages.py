"""Group-relative advantages."""

from typing import Sequence

import numpy as np

from rlvr_lab.pipeline.types import PromptGroup

DEFAULT_STD_FLOOR = 1e-6


def group_advantages(rewards: Sequence[float], std_floor: float = DEFAULT_STD_FLOOR) -> np.ndarray:
    """(R - mean) / max(std, floor) with the population standard deviation."""
    scores = np.asarray(rewards, dtype=np.float64)
    if scores.size < 2:
        raise ValueError("group advantages need at least two rewards")
    return (scores - scores.mean()) / max(float(scores.std()), std_floor)


def assign_advantages(groups: Sequence[PromptGroup], std_floor: float = DEFAULT_STD_FLOOR) -> None:
    """Write each response's advantage in place; shared by all its tokens."""
    for group in groups:
        for response, adv in zip(group.responses, group_advantages(group.rewards, std_floor)):
            response.advantage = float(adv)
