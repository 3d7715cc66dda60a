"""Clip-region classification of (ratio, advantage sign, token class) triples.

Region A is the baseline trust window. B and C lie below and above the
window a token is actually clipped at. E and F are the extensions the
looser reasoning-token window opens up: E above the baseline for
positive advantages, F below it for negative ones.
"""

from __future__ import annotations

from enum import Enum
from typing import Optional, Tuple

from rlvr_lab.objective.config import Algorithm, ObjectiveConfig
from rlvr_lab.pipeline.types import TokenClass


class ClipRegion(str, Enum):
    A = "A"
    B = "B"
    C = "C"
    E = "E"
    F = "F"


def sign_label(advantage: float) -> str:
    """Zero advantages are grouped with positive ones."""
    return "pos" if advantage >= 0 else "neg"


def clip_window(token_class: Optional[TokenClass], cfg: ObjectiveConfig) -> Tuple[float, float]:
    """(eps_low, eps_high) the objective clips this token at."""
    if cfg.algorithm is Algorithm.GRPO:
        return cfg.eps, cfg.eps
    if cfg.algorithm is Algorithm.DAPO:
        return cfg.eps_low, cfg.eps_high
    eps = cfg.eps_reasoning if token_class is TokenClass.REASONING else cfg.eps_knowledge
    return eps, eps


def clip_region(
    r: float,
    advantage_sign: float,
    token_class: Optional[TokenClass],
    cfg: ObjectiveConfig,
) -> ClipRegion:
    if r <= 0:
        raise ValueError(f"importance ratio must be positive, got {r}")

    if cfg.algorithm is not Algorithm.ARCHER:
        lo, hi = clip_window(token_class, cfg)
        if r < 1 - lo:
            return ClipRegion.B
        if r > 1 + hi:
            return ClipRegion.C
        return ClipRegion.A

    base = cfg.eps_knowledge
    if 1 - base <= r <= 1 + base:
        return ClipRegion.A
    active, _ = clip_window(token_class, cfg)
    reasoning = token_class is TokenClass.REASONING
    if advantage_sign >= 0:
        if r > 1 + base:
            return ClipRegion.E if reasoning and r <= 1 + active else ClipRegion.C
        return ClipRegion.B
    if r < 1 - base:
        return ClipRegion.F if reasoning and r >= 1 - active else ClipRegion.B
    return ClipRegion.C


