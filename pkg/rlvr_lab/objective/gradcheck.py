"""End-to-end gradient check of every objective through the policy network."""

from __future__ import annotations

import itertools
import logging
from collections import Counter
from dataclasses import dataclass, field
from typing import Dict, List, Literal, Optional

import numpy as np

from rlvr_lab.envs.tasks import TaskKind, generate_instance
from rlvr_lab.objective.advantages import assign_advantages
from rlvr_lab.objective.config import Algorithm, ObjectiveConfig
from rlvr_lab.objective.entropy import assign_thresholds
from rlvr_lab.objective.losses import compute_loss
from rlvr_lab.pipeline.types import PromptGroup, ResponseRecord, TokenClass, TokenStep
from rlvr_lab.policy.model import ModelConfig, PolicyParams, init_params
from rlvr_lab.policy.sampling import logprobs_under, token_entropies
from rlvr_lab.tensor import no_grad, numerical_gradient, relative_error, reset_graph
from rlvr_lab.tensor import ops

logger = logging.getLogger(__name__)

Scale = Literal["tiny", "default"]

TOLERANCE = 1e-4
SAMPLED_COORDS = 8


@dataclass(frozen=True)
class _Shape:
    prompts: int
    group_size: int
    min_response: int
    max_response: int
    d_model: int
    max_len: int
    exhaustive: bool


_SCALES = {
    "tiny": _Shape(2, 2, 3, 4, 8, 16, exhaustive=True),
    "default": _Shape(2, 4, 3, 16, 32, 32, exhaustive=False),
}

# Importance ratios forced onto the batch, cycled per (class, advantage sign).
# All sit clear of every clip bound (0.5, 0.8, 1.2, 1.28, 1.5) so central
# differences never straddle a kink, and together they fill every clip region.
_RATIO_CYCLES = {
    (TokenClass.REASONING, "pos"): (1.35, 1.0, 1.9, 0.3),
    (TokenClass.REASONING, "neg"): (0.65, 1.0, 0.3, 1.9),
    (TokenClass.KNOWLEDGE, "pos"): (0.3, 1.0, 1.9, 1.35, 0.65),
    (TokenClass.KNOWLEDGE, "neg"): (1.9, 1.0, 0.3, 0.65, 1.35),
}


@dataclass
class GradcheckResult:
    objective: str
    beta: float
    max_rel_error: float
    worst_param: str
    coords_checked: int = 0
    region_counts: Dict[str, int] = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return self.max_rel_error < TOLERANCE


def _perturbed(params: PolicyParams, rng: np.random.Generator, std: float) -> PolicyParams:
    out = params.copy()
    for _, t in out.named_tensors():
        t.data += rng.normal(0.0, std, size=t.shape)
    return out


def _force_ratios(theta: PolicyParams, groups: List[PromptGroup]) -> None:
    """Rewrite old log-probs so each token's ratio under theta comes from its cycle."""
    cycles = {key: itertools.cycle(values) for key, values in _RATIO_CYCLES.items()}
    with no_grad():
        for r in (r for g in groups for r in g.responses):
            logp = logprobs_under(theta, r.prompt, r.tokens).data
            sign = "pos" if r.advantage >= 0 else "neg"
            for step, lp in zip(r.steps, logp):
                step.logprob_old = float(lp - np.log(next(cycles[(step.token_class, sign)])))


def build_batch(seed: int, scale: Scale = "default"):
    """Random batch with mixed rewards; returns (theta, ref, groups).

    Entropies and classes come from a perturbed snapshot; old log-probs
    are then set so the batch covers every clip region under theta.
    """
    shape = _SCALES[scale]
    rng = np.random.default_rng(seed)
    cfg = ModelConfig(vocab_size=32, d_model=shape.d_model, n_layers=1, n_heads=2, max_len=shape.max_len)
    ref = init_params(cfg, seed)
    ref.set_requires_grad(False)
    old = _perturbed(ref, rng, 0.02)
    theta = _perturbed(old, rng, 0.01)
    theta.set_requires_grad(True)

    groups: List[PromptGroup] = []
    for p in range(shape.prompts):
        inst = generate_instance(TaskKind.ADDITION, 2, seed * 1000 + p)
        rewards = np.zeros(shape.group_size)
        rewards[: shape.group_size // 2] = 1.0
        rng.shuffle(rewards)
        responses = []
        for i in range(shape.group_size):
            length = int(rng.integers(shape.min_response, shape.max_response + 1))
            tokens = [int(t) for t in rng.integers(0, cfg.vocab_size, size=length)]
            ent = token_entropies(old, inst.prompt, tokens)
            responses.append(ResponseRecord(
                steps=[TokenStep(t, 0.0, float(e)) for t, e in zip(tokens, ent)],
                reward=float(rewards[i]),
                correct=bool(rewards[i] > 0),
                truncated=False,
                prompt=tuple(inst.prompt),
                prompt_id=p,
                response_index=i,
            ))
        groups.append(PromptGroup(inst, responses, prompt_id=p))
    assign_advantages(groups)
    assign_thresholds(groups, 0.8)
    _force_ratios(theta, groups)
    return theta, ref, groups


def _objective_configs() -> List[ObjectiveConfig]:
    return [
        ObjectiveConfig(algorithm=Algorithm.GRPO, beta=0.0),
        ObjectiveConfig(algorithm=Algorithm.GRPO, beta=0.05),
        ObjectiveConfig(algorithm=Algorithm.DAPO),
        ObjectiveConfig(algorithm=Algorithm.ARCHER, beta_reasoning=0.0, beta_knowledge=0.0),
        ObjectiveConfig(algorithm=Algorithm.ARCHER, beta_reasoning=0.01, beta_knowledge=0.05),
    ]


def run_gradcheck(
    seed: int = 0,
    scale: Scale = "default",
    coords: Optional[int] = None,
    corrupt_gradient: bool = False,
) -> List[GradcheckResult]:
    """Compare analytic and central-difference gradients for each objective.

    Every coordinate is checked at the tiny scale; the default scale
    samples ``SAMPLED_COORDS`` per tensor. A positive ``coords`` forces
    that many sampled coordinates per tensor at either scale.
    ``corrupt_gradient`` scales the analytic gradient by 1.1 so the
    check must fail.
    """
    theta, ref, groups = build_batch(seed, scale)
    responses = [r for g in groups for r in g.responses]
    with no_grad():
        ref_logps = np.concatenate([logprobs_under(ref, r.prompt, r.tokens).data for r in responses])
    rng = np.random.default_rng(seed + 1)
    sample = coords if coords is not None else (None if _SCALES[scale].exhaustive else SAMPLED_COORDS)

    results: List[GradcheckResult] = []
    for cfg in _objective_configs():
        def loss_value() -> float:
            logp = ops.concat([logprobs_under(theta, r.prompt, r.tokens) for r in responses])
            return compute_loss(groups, logp, ref_logps, cfg)[0].item()

        reset_graph()
        theta.zero_grad()
        logp = ops.concat([logprobs_under(theta, r.prompt, r.tokens) for r in responses])
        loss, breakdown = compute_loss(groups, logp, ref_logps, cfg)
        loss.backward()
        analytic = theta.grads()

        worst, worst_name, checked = 0.0, "", 0
        for name, tensor in theta.named_tensors():
            if sample is None:
                idx = list(np.ndindex(tensor.shape))
            else:
                flat = rng.choice(tensor.size, size=min(sample, tensor.size), replace=False)
                idx = [np.unravel_index(int(i), tensor.shape) for i in flat]
            numeric = numerical_gradient(loss_value, tensor, indices=idx)
            a = np.array([analytic[name][i] for i in idx])
            if corrupt_gradient:
                a = a * 1.1
            err = relative_error(a, np.array([numeric[i] for i in idx]))
            checked += len(idx)
            if err > worst:
                worst, worst_name = err, name

        beta = cfg.beta if cfg.algorithm is Algorithm.GRPO else cfg.beta_knowledge
        regions = Counter(b.region.value for b in breakdown)
        result = GradcheckResult(cfg.algorithm.value, beta, worst, worst_name, checked, dict(sorted(regions.items())))
        logger.info(
            "gradcheck %s beta=%g: %d coords, max rel err %.3e (%s) regions %s %s",
            result.objective, beta, checked, worst, worst_name or "-", result.region_counts,
            "ok" if result.passed else "FAIL",
        )
        results.append(result)
    return results
