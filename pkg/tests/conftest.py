"""Shared fixtures: tiny models, hand-built responses and groups, fast train configs."""

from typing import Callable, Optional, Sequence
from unittest.mock import patch

import pytest

from rlvr_lab.envs.rewards import RewardOutcome
from rlvr_lab.envs.tasks import TaskKind, generate_instance
from rlvr_lab.pipeline.types import PromptGroup, ResponseRecord, TokenClass, TokenStep
from rlvr_lab.policy.model import ModelConfig, init_params
from rlvr_lab.policy.sampling import SamplingConfig
from rlvr_lab.trainer.config import TrainConfig


@pytest.fixture
def tiny_model_config() -> ModelConfig:
    return ModelConfig(vocab_size=32, d_model=16, n_layers=1, n_heads=2, max_len=32)


@pytest.fixture
def tiny_params(tiny_model_config):
    return init_params(tiny_model_config, seed=0)


@pytest.fixture
def uniform_params(tiny_model_config):
    """Zero output head: uniform next-token distribution everywhere."""
    return init_params(tiny_model_config, seed=0, zero_head=True)


@pytest.fixture
def addition_instance():
    return generate_instance(TaskKind.ADDITION, 2, 7)


@pytest.fixture
def make_response() -> Callable[..., ResponseRecord]:
    """Build a ResponseRecord from per-token lists."""

    def _make(
        tokens: Sequence[int],
        logprobs: Optional[Sequence[float]] = None,
        entropies: Optional[Sequence[float]] = None,
        classes: Optional[Sequence[TokenClass]] = None,
        reward: float = 0.0,
        advantage: Optional[float] = None,
        threshold: Optional[float] = None,
        prompt_id: int = 0,
        response_index: int = 0,
    ) -> ResponseRecord:
        n = len(tokens)
        logprobs = list(logprobs) if logprobs is not None else [-1.0] * n
        entropies = list(entropies) if entropies is not None else [1.0] * n
        classes = list(classes) if classes is not None else [None] * n
        return ResponseRecord(
            steps=[TokenStep(int(t), float(lp), float(e), c) for t, lp, e, c in zip(tokens, logprobs, entropies, classes)],
            reward=reward,
            correct=reward > 0,
            truncated=False,
            prompt=(0, 2, 3),
            prompt_id=prompt_id,
            response_index=response_index,
            advantage=advantage,
            entropy_threshold=threshold,
        )

    return _make


@pytest.fixture
def make_group(addition_instance, make_response) -> Callable[..., PromptGroup]:
    """Group with one single-token response per reward."""

    def _make(rewards: Sequence[float], prompt_id: int = 0) -> PromptGroup:
        responses = [
            make_response([2 + i % 10], reward=float(r), prompt_id=prompt_id, response_index=i)
            for i, r in enumerate(rewards)
        ]
        return PromptGroup(addition_instance, responses, prompt_id=prompt_id)

    return _make


def parity_reward(response, ground_truth, truncated, shaping=None, completion_length=None,
                  max_length=None, vocab=None) -> RewardOutcome:
    """Stand-in verifier: a transcript is correct when its token sum is even."""
    correct = sum(int(t) for t in response) % 2 == 0
    return RewardOutcome(1.0 if correct else 0.0, correct, False)


@pytest.fixture
def mixed_rewards():
    """Patch rollouts to the parity verifier so an untrained policy sees mixed groups."""
    with patch("rlvr_lab.pipeline.rollout.reward", side_effect=parity_reward):
        yield


@pytest.fixture
def tiny_train_config(tiny_model_config) -> TrainConfig:
    return TrainConfig(
        total_steps=2,
        batch_size=2,
        minibatch_size=4,
        rollouts_per_prompt=4,
        learning_rate=1e-2,
        seed=3,
        model=tiny_model_config,
        sampling=SamplingConfig(max_new_tokens=4),
        eval_sampling=SamplingConfig(temperature=0.8, max_new_tokens=4),
        eval_instances=4,
    )

