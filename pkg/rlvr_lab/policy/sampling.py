"""Temperature / top-p sampling and per-token scoring.

Sampling and scoring share ``scored_log_probs`` so log-probabilities
recorded at generation time and those recomputed later for the
importance ratio come from the same distribution. Each sampled token
carries the nucleus it was drawn from; rescoring under another policy
reuses that nucleus instead of recomputing one from its own logits.
"""

from __future__ import annotations

from typing import NamedTuple, Optional, Sequence, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field

from rlvr_lab.envs.vocab import STOP_ID
from rlvr_lab.policy.model import PolicyParams, forward_logits
from rlvr_lab.tensor import Tensor, TensorError, no_grad
from rlvr_lab.tensor import ops


class SamplingConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    temperature: float = Field(1.0, gt=0.0)
    top_p: float = Field(1.0, gt=0.0, le=1.0)
    max_new_tokens: int = Field(8, ge=1)
    stop_token: int = Field(STOP_ID, ge=0)
    greedy: bool = False

    @property
    def effective_temperature(self) -> float:
        return 1.0 if self.greedy else self.temperature


Nucleus = Optional[Tuple[int, ...]]


class SampledResponse(NamedTuple):
    tokens: list[int]
    logprobs: list[float]
    entropies: list[float]
    truncated: bool
    # kept token ids per position; None where no top-p truncation applied
    nuclei: list[Nucleus]


def _top_p_mask(scaled: np.ndarray, top_p: float) -> np.ndarray:
    """True for tokens outside the smallest nucleus holding top_p mass, per row."""
    probs = np.exp(scaled - scaled.max(axis=-1, keepdims=True))
    probs /= probs.sum(axis=-1, keepdims=True)
    order = np.argsort(-probs, axis=-1, kind="stable")
    sorted_p = np.take_along_axis(probs, order, axis=-1)
    before = np.cumsum(sorted_p, axis=-1) - sorted_p
    keep_sorted = before < top_p
    keep = np.zeros_like(keep_sorted)
    np.put_along_axis(keep, order, keep_sorted, axis=-1)
    return ~keep


def nucleus_mask(logits: np.ndarray, cfg: SamplingConfig) -> Optional[np.ndarray]:
    """Outside-the-nucleus mask of temperature-scaled ``logits``; None without truncation."""
    if cfg.greedy or cfg.top_p >= 1.0:
        return None
    return _top_p_mask(logits * (1.0 / cfg.effective_temperature), cfg.top_p)


def mask_from_nuclei(nuclei: Sequence[Nucleus], vocab_size: int) -> Optional[np.ndarray]:
    """Rebuild the outside mask from recorded nuclei; a None row masks nothing."""
    if all(keep is None for keep in nuclei):
        return None
    outside = np.zeros((len(nuclei), vocab_size), dtype=bool)
    for row, keep in zip(outside, nuclei):
        if keep is not None:
            row[:] = True
            row[list(keep)] = False
    return outside


def scored_log_probs(logits: Tensor, cfg: SamplingConfig, outside: Optional[np.ndarray] = None) -> Tensor:
    """Log-probabilities of the distribution actually sampled from.

    Temperature scaling, then a constant mask outside the nucleus, then
    log-softmax. ``outside`` pins the mask; without it the nucleus is
    taken from ``logits`` themselves (unless greedy or top_p == 1).
    """
    if outside is None:
        outside = nucleus_mask(logits.data, cfg)
    scaled = ops.scale(logits, 1.0 / cfg.effective_temperature)
    if outside is not None:
        scaled = ops.masked_fill(scaled, outside, -1e30)
    return ops.log_softmax(scaled)


def _entropy(row_logits: np.ndarray, temperature: float) -> float:
    """Entropy in nats of the full temperature-scaled distribution."""
    z = row_logits / temperature
    z = z - z.max()
    logp = z - np.log(np.exp(z).sum())
    p = np.exp(logp)
    return float(np.clip(-(p * logp).sum(), 0.0, np.log(row_logits.size)))


def sample_response(
    params: PolicyParams,
    prompt: Sequence[int],
    cfg: SamplingConfig,
    rng_seed: int,
) -> SampledResponse:
    """Generate until the stop token or the token budget.

    Entropies are taken before top-p truncation. Greedy mode takes the
    argmax and reports logprob and entropy at temperature 1.
    """
    max_len = params.config.max_len
    if len(prompt) == 0:
        raise TensorError("prompt must be non-empty")
    if len(prompt) >= max_len:
        raise TensorError(f"prompt length {len(prompt)} leaves no room to generate under max_len {max_len}")
    rng = np.random.default_rng(rng_seed)
    seq = [int(t) for t in prompt]
    tokens: list[int] = []
    logprobs: list[float] = []
    entropies: list[float] = []
    nuclei: list[Nucleus] = []

    with no_grad():
        while len(tokens) < cfg.max_new_tokens and len(seq) < max_len:
            logits = forward_logits(params, seq)
            last = logits.data[-1:]
            row = last[0]
            entropies.append(_entropy(row, cfg.effective_temperature))
            outside = nucleus_mask(last, cfg)
            nuclei.append(None if outside is None else tuple(np.flatnonzero(~outside[0]).tolist()))
            lp = scored_log_probs(Tensor(last), cfg, outside).data[0]
            if cfg.greedy:
                tok = int(np.argmax(row))
            else:
                cdf = np.cumsum(np.exp(lp))
                tok = min(int(np.searchsorted(cdf, rng.random() * cdf[-1], side="right")), row.size - 1)
            tokens.append(tok)
            logprobs.append(float(lp[tok]))
            seq.append(tok)
            if tok == cfg.stop_token:
                return SampledResponse(tokens, logprobs, entropies, False, nuclei)

    return SampledResponse(tokens, logprobs, entropies, True, nuclei)


def logprobs_under(
    params: PolicyParams,
    prompt: Sequence[int],
    response: Sequence[int],
    cfg: Optional[SamplingConfig] = None,
    nuclei: Optional[Sequence[Nucleus]] = None,
) -> Tensor:
    """Per-token log pi(response_t | prompt, response_<t) as a 1-D tensor.

    Differentiable when ``params`` require grad and grad mode is on;
    frozen snapshots score without building a graph. ``nuclei`` are the
    rollout-time nuclei of ``response``; when given they fix the top-p
    mask, so every sampled token scores finite under any policy.
    """
    cfg = cfg or SamplingConfig()
    if len(prompt) == 0 or len(response) == 0:
        raise TensorError("logprobs_under needs a non-empty prompt and response")
    if nuclei is not None and len(nuclei) != len(response):
        raise TensorError(f"{len(nuclei)} nuclei for {len(response)} response tokens")
    seq = [int(t) for t in prompt] + [int(t) for t in response]
    if len(seq) > params.config.max_len:
        raise TensorError(f"prompt + response length {len(seq)} exceeds max_len {params.config.max_len}")
    p, r = len(prompt), len(response)
    logits = forward_logits(params, seq[:-1])
    rows = ops.slice_rows(logits, p - 1, p + r - 1)
    outside = mask_from_nuclei(nuclei, params.config.vocab_size) if nuclei is not None else None
    return ops.pick(scored_log_probs(rows, cfg, outside), response)


def token_entropies(
    params: PolicyParams,
    prompt: Sequence[int],
    response: Sequence[int],
    cfg: Optional[SamplingConfig] = None,
) -> np.ndarray:
    """Entropies of the full temperature-scaled distribution at each response position."""
    cfg = cfg or SamplingConfig()
    seq = [int(t) for t in prompt] + [int(t) for t in response]
    with no_grad():
        logits = forward_logits(params, seq[:-1]).data[len(prompt) - 1:]
    return np.array([_entropy(row, cfg.effective_temperature) for row in logits])
