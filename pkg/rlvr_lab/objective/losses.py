"""Clipped-surrogate objectives over a flattened token batch.

All three objectives share one computation:

    loss = -sum_t w_t * (min(r_t A_t, clip(r_t, 1 - lo_t, 1 + hi_t) A_t) - beta_t * kl_t)

and differ only in the per-token clip bounds, KL weights and aggregation
weights w_t (token-level 1 / sum|o| for dapo and archer, 1 / (n |o_i|)
for grpo).
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np

from rlvr_lab.objective.config import Algorithm, ObjectiveConfig
from rlvr_lab.objective.entropy import ObjectiveError, select_beta
from rlvr_lab.objective.regions import ClipRegion, clip_region, clip_window
from rlvr_lab.pipeline.types import PromptGroup, ResponseRecord, TokenClass
from rlvr_lab.tensor import Tensor
from rlvr_lab.tensor import ops

logger = logging.getLogger(__name__)

Batch = Sequence[Union[PromptGroup, ResponseRecord]]
Number = Union[float, np.ndarray]


@dataclass(frozen=True)
class TokenLossBreakdown:
    ratio: float
    advantage: float
    epsilon_used: float
    beta_used: float
    surrogate_term: float
    kl_term: float
    clipped: bool
    region: ClipRegion
    token_class: Optional[TokenClass]


@dataclass
class TokenBatch:
    """Per-token constants of a batch, in group order then token order."""
    responses: List[ResponseRecord]
    logprob_old: np.ndarray
    advantage: np.ndarray
    eps_low: np.ndarray
    eps_high: np.ndarray
    beta: np.ndarray
    weight: np.ndarray
    token_class: List[Optional[TokenClass]]

    @property
    def n_tokens(self) -> int:
        return int(self.logprob_old.size)


def _responses(batch: Batch) -> List[ResponseRecord]:
    out: List[ResponseRecord] = []
    for item in batch:
        if isinstance(item, PromptGroup):
            out.extend(item.responses)
        else:
            out.append(item)
    if not out:
        raise ObjectiveError("empty batch")
    return out


def flatten_batch(batch: Batch, cfg: ObjectiveConfig) -> TokenBatch:
    responses = _responses(batch)
    lengths = np.array([r.length for r in responses])
    n_tokens = int(lengths.sum())

    adv, lo, hi, beta, weight = (np.empty(n_tokens) for _ in range(5))
    classes: List[Optional[TokenClass]] = []
    pos = 0
    for resp in responses:
        if resp.advantage is None:
            raise ObjectiveError(f"response {resp.prompt_id}/{resp.response_index} has no advantage")
        if cfg.algorithm is Algorithm.ARCHER and (
            resp.entropy_threshold is None or any(c is None for c in resp.token_classes)
        ):
            raise ObjectiveError(f"response {resp.prompt_id}/{resp.response_index} is not classified")
        span = slice(pos, pos + resp.length)
        adv[span] = resp.advantage
        if cfg.algorithm is Algorithm.GRPO:
            weight[span] = 1.0 / (len(responses) * resp.length)
        else:
            weight[span] = 1.0 / n_tokens
        for j, cls in enumerate(resp.token_classes):
            lo[pos + j], hi[pos + j] = clip_window(cls, cfg)
            if cfg.algorithm is Algorithm.ARCHER:
                beta[pos + j] = select_beta(cls, cfg)
            elif cfg.algorithm is Algorithm.GRPO:
                beta[pos + j] = cfg.beta
            else:
                beta[pos + j] = 0.0
        classes.extend(resp.token_classes)
        pos += resp.length

    return TokenBatch(
        responses=responses,
        logprob_old=np.concatenate([r.logprobs_old for r in responses]),
        advantage=adv,
        eps_low=lo,
        eps_high=hi,
        beta=beta,
        weight=weight,
        token_class=classes,
    )


def surrogate_term(r, advantage: Number, eps_low_eff: Number, eps_high_eff: Number):
    """min(r A, clip(r, 1 - lo, 1 + hi) A); ties take the unclipped branch.

    Accepts a Tensor ratio (returns a Tensor) or plain floats (returns a float).
    """
    if not isinstance(r, Tensor):
        return surrogate_term(Tensor(r), advantage, eps_low_eff, eps_high_eff).data.item()
    if np.any(r.data <= 0):
        raise ObjectiveError("importance ratio must be positive")
    adv = np.broadcast_to(np.asarray(advantage, dtype=np.float64), r.shape)
    lo = 1.0 - np.broadcast_to(np.asarray(eps_low_eff, dtype=np.float64), r.shape)
    hi = 1.0 + np.broadcast_to(np.asarray(eps_high_eff, dtype=np.float64), r.shape)
    unclipped = ops.mul(r, adv)
    clipped = ops.mul(ops.clamp(r, lo, hi), adv)
    return ops.minimum(unclipped, clipped)


def kl_term(logp_theta, logp_ref, estimator: str = "k3"):
    """Per-token KL estimate to the reference policy.

    k3: exp(d) - d - 1 with d = logp_ref - logp_theta (evaluated as
    expm1(d) - d, never negative). k1: logp_theta - logp_ref.
    """
    if not isinstance(logp_theta, Tensor):
        return kl_term(Tensor(logp_theta), logp_ref, estimator).data.item()
    ref = np.broadcast_to(np.asarray(logp_ref, dtype=np.float64), logp_theta.shape)
    if not np.all(np.isfinite(ref)):
        raise ObjectiveError("reference log-probabilities must be finite")
    if estimator == "k1":
        return ops.sub(logp_theta, ref)
    delta = ops.sub(ref, logp_theta)
    return ops.sub(ops.expm1(delta), delta)


def _objective(
    tb: TokenBatch,
    logp_theta: Tensor,
    logp_ref: Optional[np.ndarray],
    cfg: ObjectiveConfig,
) -> Tuple[Tensor, List[TokenLossBreakdown]]:
    if logp_theta.shape != (tb.n_tokens,):
        raise ObjectiveError(f"logp_theta has shape {logp_theta.shape}, batch has {tb.n_tokens} tokens")

    ratio = ops.exp(ops.sub(logp_theta, tb.logprob_old))
    terms = surrogate_term(ratio, tb.advantage, tb.eps_low, tb.eps_high)
    surr_values = terms.data.copy()

    kl_values = np.zeros(tb.n_tokens)
    if logp_ref is not None:
        ref = np.asarray(logp_ref, dtype=np.float64)
        if ref.shape != (tb.n_tokens,):
            raise ObjectiveError(f"logp_ref has shape {ref.shape}, batch has {tb.n_tokens} tokens")
        if np.any(tb.beta > 0):
            kl = kl_term(logp_theta, ref, cfg.kl_estimator)
            kl_values = kl.data.copy()
            terms = ops.sub(terms, ops.mul(kl, tb.beta))
        else:
            kl_values = kl_term(Tensor(logp_theta.data), ref, cfg.kl_estimator).data
    elif np.any(tb.beta > 0):
        raise ObjectiveError("a positive KL weight needs reference log-probabilities")

    loss = ops.neg(ops.sum(ops.mul(terms, tb.weight)))

    r = ratio.data
    breakdown = []
    for t in range(tb.n_tokens):
        lo, hi = tb.eps_low[t], tb.eps_high[t]
        breakdown.append(TokenLossBreakdown(
            ratio=float(r[t]),
            advantage=float(tb.advantage[t]),
            epsilon_used=float(hi if r[t] >= 1 else lo),
            beta_used=float(tb.beta[t]),
            surrogate_term=float(surr_values[t]),
            kl_term=float(kl_values[t]),
            clipped=bool(r[t] < 1 - lo or r[t] > 1 + hi),
            region=clip_region(float(r[t]), float(tb.advantage[t]), tb.token_class[t], cfg),
            token_class=tb.token_class[t],
        ))
    return loss, breakdown


def archer_loss(
    batch: Batch,
    logp_theta: Tensor,
    logp_ref: Optional[np.ndarray],
    cfg: ObjectiveConfig,
) -> Tuple[Tensor, List[TokenLossBreakdown]]:
    """Dual-token objective: per-class symmetric clip and KL weight, token-level mean."""
    if cfg.algorithm is not Algorithm.ARCHER:
        raise ObjectiveError(f"archer_loss needs algorithm 'archer', got {cfg.algorithm.value!r}")
    return _objective(flatten_batch(batch, cfg), logp_theta, logp_ref, cfg)


def dapo_loss(
    batch: Batch,
    logp_theta: Tensor,
    cfg: ObjectiveConfig,
) -> Tuple[Tensor, List[TokenLossBreakdown]]:
    """Asymmetric clip (eps_low, eps_high), no KL, token-level mean."""
    dapo_cfg = cfg if cfg.algorithm is Algorithm.DAPO else cfg.model_copy(update={"algorithm": Algorithm.DAPO})
    return _objective(flatten_batch(batch, dapo_cfg), logp_theta, None, dapo_cfg)


def grpo_loss(
    batch: Batch,
    logp_theta: Tensor,
    logp_ref: Optional[np.ndarray],
    cfg: ObjectiveConfig,
) -> Tuple[Tensor, List[TokenLossBreakdown]]:
    """Symmetric clip eps, uniform KL weight beta, mean of per-response means."""
    grpo_cfg = cfg if cfg.algorithm is Algorithm.GRPO else cfg.model_copy(update={"algorithm": Algorithm.GRPO})
    return _objective(flatten_batch(batch, grpo_cfg), logp_theta, logp_ref, grpo_cfg)


def compute_loss(
    batch: Batch,
    logp_theta: Tensor,
    logp_ref: Optional[np.ndarray],
    cfg: ObjectiveConfig,
) -> Tuple[Tensor, List[TokenLossBreakdown]]:
    if cfg.algorithm is Algorithm.ARCHER:
        return archer_loss(batch, logp_theta, logp_ref, cfg)
    if cfg.algorithm is Algorithm.DAPO:
        return dapo_loss(batch, logp_theta, cfg)
    return grpo_loss(batch, logp_theta, logp_ref, cfg)
