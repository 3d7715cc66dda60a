"""Rollout pipeline module."""

from rlvr_lab.pipeline.types import PromptGroup, ResponseRecord, RolloutLogRecord, TokenClass, TokenStep
from rlvr_lab.pipeline.rollout import RefillResult, dynamic_sampling_filter, refill_to_batch, rollout_group

__all__ = [
    "PromptGroup",
    "ResponseRecord",
    "RolloutLogRecord",
    "TokenClass",
    "TokenStep",
    "RefillResult",
    "dynamic_sampling_filter",
    "refill_to_batch",
    "rollout_group",
]
