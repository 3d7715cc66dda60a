"""Advantages, entropy classification and policy-gradient objectives."""

from rlvr_lab.objective.config import Algorithm, ObjectiveConfig
from rlvr_lab.objective.advantages import assign_advantages, group_advantages
from rlvr_lab.objective.entropy import (
    ObjectiveError,
    assign_thresholds,
    classify_tokens,
    entropy_quantile,
    select_beta,
    select_clip,
)
from rlvr_lab.objective.regions import ClipRegion, clip_region, clip_window
from rlvr_lab.objective.losses import (
    TokenBatch,
    TokenLossBreakdown,
    archer_loss,
    compute_loss,
    dapo_loss,
    flatten_batch,
    grpo_loss,
    kl_term,
    surrogate_term,
)

__all__ = [
    "Algorithm",
    "ObjectiveConfig",
    "assign_advantages",
    "group_advantages",
    "ObjectiveError",
    "assign_thresholds",
    "classify_tokens",
    "entropy_quantile",
    "select_beta",
    "select_clip",
    "ClipRegion",
    "clip_region",
    "clip_window",
    "TokenBatch",
    "TokenLossBreakdown",
    "archer_loss",
    "compute_loss",
    "dapo_loss",
    "flatten_batch",
    "grpo_loss",
    "kl_term",
    "surrogate_term",
]
