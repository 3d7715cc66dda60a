import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, List, Optional, Sequence, Tuple

from rlvr_lab.envs.rewards import ShapingConfig, reward
from rlvr_lab.envs.tasks import TaskInstance
from rlvr_lab.pipeline.types import PromptGroup, ResponseRecord, TokenStep
from rlvr_lab.policy.model import PolicyParams
from rlvr_lab.policy.sampling import SamplingConfig, sample_response
from rlvr_lab.utils.seeding import derive_seed

logger = logging.getLogger(__name__)

GroupGenerator = Callable[[int], PromptGroup]
GroupFilter = Callable[[List[PromptGroup]], Tuple[List[PromptGroup], int]]

# Prompts tried per kept group before a step is declared unlearnable.
DEFAULT_BUDGET_FACTOR = 10


def rollout_group(
    instance: TaskInstance,
    params_old: PolicyParams,
    group_size: int,
    sampling_cfg: SamplingConfig,
    seed: int,
    shaping: Optional[ShapingConfig] = None,
    prompt_id: int = 0,
) -> PromptGroup:
    """Draw ``group_size`` responses for one prompt from the frozen rollout policy.

    Response i uses seed derive_seed(seed, i), so a fixed seed yields a
    bit-identical group.
    """
    if group_size < 2:
        raise ValueError(f"group size must be >= 2, got {group_size}")

    responses: List[ResponseRecord] = []
    for i in range(group_size):
        sample = sample_response(params_old, instance.prompt, sampling_cfg, derive_seed(seed, i))
        outcome = reward(
            list(instance.prompt) + sample.tokens,
            instance.ground_truth,
            sample.truncated,
            shaping,
            completion_length=len(sample.tokens),
            max_length=sampling_cfg.max_new_tokens,
        )
        responses.append(ResponseRecord(
            steps=[
                TokenStep(t, lp, e, nucleus=nu)
                for t, lp, e, nu in zip(sample.tokens, sample.logprobs, sample.entropies, sample.nuclei)
            ],
            reward=outcome.reward,
            correct=outcome.correct,
            truncated=sample.truncated,
            prompt=tuple(instance.prompt),
            prompt_id=prompt_id,
            response_index=i,
        ))
    return PromptGroup(instance=instance, responses=responses, prompt_id=prompt_id)


def dynamic_sampling_filter(groups: Sequence[PromptGroup]) -> Tuple[List[PromptGroup], int]:
    """Keep groups with 0 < correct < G, preserving order."""
    kept = [g for g in groups if 0 < g.correct_count < g.size]
    return kept, len(groups) - len(kept)


@dataclass
class RefillResult:
    groups: List[PromptGroup]
    prompts_consumed: int
    dropped_count: int
    exhausted: bool
    dropped: List[PromptGroup] = field(default_factory=list)

    @property
    def unlearnable(self) -> bool:
        """Budget ran out without a single informative group."""
        return self.exhausted and not self.groups


def refill_to_batch(
    batch_target: int,
    generator: GroupGenerator,
    group_filter: GroupFilter = dynamic_sampling_filter,
    max_prompts: Optional[int] = None,
    workers: int = 1,
) -> RefillResult:
    """Roll out fresh prompts until ``batch_target`` groups survive the filter.

    Prompts are requested in waves sized to the remaining shortfall and
    indexed 0, 1, 2, ...; with several workers a wave runs in parallel
    but results are consumed in prompt-index order.
    """
    if batch_target < 1:
        raise ValueError("batch_target must be >= 1")
    budget = max_prompts if max_prompts is not None else DEFAULT_BUDGET_FACTOR * batch_target

    kept: List[PromptGroup] = []
    dropped: List[PromptGroup] = []
    consumed = 0
    executor = ThreadPoolExecutor(max_workers=workers) if workers > 1 else None
    try:
        while len(kept) < batch_target and consumed < budget:
            wave = range(consumed, consumed + min(batch_target - len(kept), budget - consumed))
            if executor is not None:
                groups = list(executor.map(generator, wave))
            else:
                groups = [generator(i) for i in wave]
            consumed += len(wave)
            survivors, _ = group_filter(groups)
            survivor_ids = {id(g) for g in survivors}
            dropped.extend(g for g in groups if id(g) not in survivor_ids)
            kept.extend(survivors)
    finally:
        if executor is not None:
            executor.shutdown(wait=True)

    exhausted = len(kept) < batch_target
    if exhausted:
        logger.debug("Refill budget of %d prompts exhausted with %d/%d groups", budget, len(kept), batch_target)
    return RefillResult(kept, consumed, len(dropped), exhausted, dropped)
