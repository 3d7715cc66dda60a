"""Response-level entropy thresholds and the token classification they induce."""

from typing import List, Sequence

import numpy as np

from rlvr_lab.objective.config import Algorithm, ObjectiveConfig
from rlvr_lab.pipeline.types import PromptGroup, TokenClass


class ObjectiveError(ValueError):
    """Batch is missing advantages, thresholds or token classes, or the config does not fit."""


def entropy_quantile(entropies: Sequence[float], rho: float) -> float:
    """Linear-interpolation rho-quantile: h = (n - 1) * rho between sorted neighbours."""
    values = np.asarray(entropies, dtype=np.float64)
    if values.size == 0:
        raise ValueError("entropy_quantile of an empty list")
    return float(np.quantile(values, rho, method="linear"))


def classify_tokens(entropies: Sequence[float], tau: float) -> List[TokenClass]:
    return [TokenClass.REASONING if e >= tau else TokenClass.KNOWLEDGE for e in entropies]


def _require_archer(cfg: ObjectiveConfig) -> None:
    if cfg.algorithm is not Algorithm.ARCHER:
        raise ObjectiveError(f"per-class parameters need algorithm 'archer', got {cfg.algorithm.value!r}")


def select_clip(token_class: TokenClass, cfg: ObjectiveConfig) -> float:
    _require_archer(cfg)
    return cfg.eps_reasoning if token_class is TokenClass.REASONING else cfg.eps_knowledge


def select_beta(token_class: TokenClass, cfg: ObjectiveConfig) -> float:
    _require_archer(cfg)
    return cfg.beta_reasoning if token_class is TokenClass.REASONING else cfg.beta_knowledge


def assign_thresholds(groups: Sequence[PromptGroup], rho: float) -> None:
    """Set each response's entropy threshold and classify its tokens in place."""
    for group in groups:
        for response in group.responses:
            tau = entropy_quantile(response.entropies, rho)
            response.entropy_threshold = tau
            for step, cls in zip(response.steps, classify_tokens(response.entropies, tau)):
                step.token_class = cls
