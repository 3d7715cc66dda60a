"""Reward assignment on top of the verifier, with optional overlong shaping."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
from pydantic import BaseModel, ConfigDict, Field

from rlvr_lab.envs.verifier import is_equivalent
from rlvr_lab.envs.vocab import VOCAB, Vocabulary


class ShapingConfig(BaseModel):
    """Linear penalty for truncated completions; off by default."""

    model_config = ConfigDict(extra="forbid")

    enabled: bool = False
    max_penalty: float = Field(0.5, ge=0.0, le=1.0)
    soft_length: int = Field(0, ge=0)


@dataclass(frozen=True)
class RewardOutcome:
    reward: float
    correct: bool
    truncated_penalty_applied: bool


def overrun_fraction(completion_length: Optional[int], max_length: Optional[int], soft_length: int) -> float:
    """Share of the (soft_length, max_length] window used up, in [0, 1]."""
    if completion_length is None or max_length is None or max_length <= soft_length:
        return 1.0
    return float(np.clip((completion_length - soft_length) / (max_length - soft_length), 0.0, 1.0))


def reward(
    response: Sequence[int],
    ground_truth: str,
    truncated: bool,
    shaping: Optional[ShapingConfig] = None,
    completion_length: Optional[int] = None,
    max_length: Optional[int] = None,
    vocab: Vocabulary = VOCAB,
) -> RewardOutcome:
    """Score a full transcript.

    Args:
        response: prompt plus completion token ids.
        ground_truth: canonical answer string.
        truncated: the completion hit the token budget without a stop token.
        shaping: overlong penalty settings; None disables shaping.
        completion_length: generated token count, for the overrun fraction.
        max_length: generation budget; a truncated completion at the budget
            gets the full penalty.

    Returns:
        RewardOutcome with reward clamped to [-1, 1].
    """
    correct = is_equivalent(response, ground_truth, vocab)
    value = 1.0 if correct else 0.0
    penalised = False
    if shaping is not None and shaping.enabled and truncated:
        value -= shaping.max_penalty * overrun_fraction(completion_length, max_length, shaping.soft_length)
        penalised = True
    return RewardOutcome(float(np.clip(value, -1.0, 1.0)), correct, penalised)
