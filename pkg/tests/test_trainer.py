"""Tests for the optimizer, the training loop and ablation sweeps."""

from unittest.mock import MagicMock, patch

import numpy as np
import pandas as pd
import pytest
from pydantic import ValidationError

from rlvr_lab.analytics import sweep_tail_summary
from rlvr_lab.config import load_run_config
from rlvr_lab.envs.rewards import RewardOutcome
from rlvr_lab.envs.task_io import TaskMixEntry
from rlvr_lab.envs.tasks import TaskKind
from rlvr_lab.policy.checkpoint import checkpoint_bytes
from rlvr_lab.policy.model import init_params
from rlvr_lab.policy.sampling import SamplingConfig
from rlvr_lab.trainer import (
    AdamState,
    OptimizerError,
    SweepAxis,
    TrainConfig,
    Trainer,
    ablation_sweep,
    clip_grad_norm,
    config_for,
    optimizer_step,
    train,
)
from rlvr_lab.utils.seeding import INIT_STREAM, derive_seed


class RecordingSink:
    def __init__(self):
        self.steps = []
        self.rollouts = []
        self.checkpoints = []

    def on_step(self, report):
        self.steps.append(report)

    def on_rollouts(self, records):
        self.rollouts.append(records)

    def on_checkpoint(self, step, params, rng_state, final):
        self.checkpoints.append((step, rng_state, final))


class TestOptimizer:
    def test_first_step_moves_by_learning_rate(self, tiny_params):
        before = tiny_params.copy()
        grads = {name: np.ones_like(t.data) for name, t in tiny_params.named_tensors()}
        state = optimizer_step(tiny_params, grads, 1e-2, AdamState())
        assert state.step == 1
        for (name, new), (_, old) in zip(tiny_params.named_tensors(), before.named_tensors()):
            np.testing.assert_allclose(old.data - new.data, 1e-2, rtol=1e-6)

    def test_zero_gradient_leaves_params(self, tiny_params):
        before = tiny_params.copy()
        optimizer_step(tiny_params, {}, 1e-2, AdamState())
        assert tiny_params.equals(before)

    def test_non_finite_gradient_refused(self, tiny_params):
        before = tiny_params.copy()
        state = AdamState()
        grads = {"head": np.full_like(tiny_params["head"].data, np.nan)}
        with pytest.raises(OptimizerError, match="head"):
            optimizer_step(tiny_params, grads, 1e-2, state)
        assert state.step == 0
        assert tiny_params.equals(before)

    def test_clip_grad_norm(self):
        grads = {"a": np.array([3.0, 4.0])}
        assert clip_grad_norm(grads, 1.0) == pytest.approx(5.0)
        np.testing.assert_allclose(grads["a"], [0.6, 0.8])

    def test_clip_disabled(self):
        grads = {"a": np.array([3.0, 4.0])}
        clip_grad_norm(grads, None)
        np.testing.assert_array_equal(grads["a"], [3.0, 4.0])


class TestTrainer:
    def test_fixed_seed_is_bit_identical(self, tiny_train_config, mixed_rewards):
        a = train(tiny_train_config)
        b = train(tiny_train_config)
        assert [r.to_dict() for r in a.reports] == [r.to_dict() for r in b.reports]
        assert checkpoint_bytes(a.params) == checkpoint_bytes(b.params)

    def test_reports_are_finite(self, tiny_train_config, mixed_rewards):
        reports = train(tiny_train_config).reports
        assert [r.step for r in reports] == [0, 1]
        for r in reports:
            assert not r.skipped
            assert r.kept_groups == tiny_train_config.batch_size
            values = [v for v in r.to_row().values() if isinstance(v, float)]
            assert np.all(np.isfinite(values))
            assert 0.0 <= r.reasoning_fraction <= 1.0
            assert sum(r.region_counts.values()) > 0

    def test_zero_learning_rate_keeps_initial_policy(self, tiny_train_config, mixed_rewards):
        cfg = tiny_train_config.model_copy(update={"learning_rate": 0.0})
        result = train(cfg)
        assert result.params.equals(result.reference)

    def test_policy_moves_with_positive_learning_rate(self, tiny_train_config, mixed_rewards):
        result = train(tiny_train_config)
        assert not result.params.equals(result.reference)

    def test_reference_stays_bit_identical_to_initial_policy(self, tiny_train_config, mixed_rewards):
        cfg = tiny_train_config.model_copy(update={"learning_rate": 5e-2, "total_steps": 3})
        result = train(cfg)
        initial = init_params(cfg.model, derive_seed(cfg.seed, INIT_STREAM))
        assert not result.params.equals(initial)
        assert result.reference.equals(initial)

    def test_top_p_training_stays_finite(self, tiny_train_config, mixed_rewards):
        cfg = tiny_train_config.model_copy(update={
            "sampling": SamplingConfig(top_p=0.3, max_new_tokens=4),
            "learning_rate": 5e-2,
            "minibatch_size": 2,
            "total_steps": 6,
        })
        result = train(cfg)
        assert len(result.reports) == 6
        assert any(not r.skipped for r in result.reports)
        for r in result.reports:
            values = [v for v in r.to_row().values() if isinstance(v, float)]
            assert np.all(np.isfinite(values))
        assert not result.params.equals(result.reference)

    def test_prompts_longer_than_context_rejected(self, tiny_model_config):
        with pytest.raises(ValidationError, match="no room to generate"):
            TrainConfig(
                model=tiny_model_config.model_copy(update={"max_len": 8}),
                tasks=[TaskMixEntry(kind=TaskKind.ADDITION, difficulty=4)],
            )

    def test_unlearnable_step_is_skipped(self, tiny_train_config):
        sink = RecordingSink()
        with patch("rlvr_lab.pipeline.rollout.reward", return_value=RewardOutcome(0.0, False, False)):
            result = train(tiny_train_config.model_copy(update={"total_steps": 1}), sink=sink)
        report = result.reports[0]
        assert report.skipped
        assert report.kept_groups == 0
        assert report.prompts_consumed == tiny_train_config.refill_budget_factor * tiny_train_config.batch_size
        assert result.params.equals(result.reference)
        assert sink.rollouts == []

    def test_sink_receives_steps_rollouts_and_final_checkpoint(self, tiny_train_config, mixed_rewards):
        sink = RecordingSink()
        train(tiny_train_config, sink=sink)
        assert [r.step for r in sink.steps] == [0, 1]
        assert len(sink.rollouts) == 2
        first = sink.rollouts[0]
        assert len(first) == tiny_train_config.responses_per_step
        assert all(rec.step == 0 and len(rec.ratios) == len(rec.tokens) for rec in first)
        assert sink.checkpoints == [(2, {"master_seed": 3, "next_step": 2, "adam_step": 4}, True)]

    def test_periodic_checkpoints(self, tiny_train_config, mixed_rewards):
        sink = RecordingSink()
        train(tiny_train_config.model_copy(update={"checkpoint_interval": 1}), sink=sink)
        assert [(s, final) for s, _, final in sink.checkpoints] == [(1, False), (2, False), (2, True)]

    def test_periodic_evaluation(self, tiny_train_config, mixed_rewards):
        reports = train(tiny_train_config.model_copy(update={"eval_interval": 2})).reports
        assert reports[0].eval_avg_at_1 is None
        assert 0.0 <= reports[1].eval_avg_at_1 <= 1.0

    def test_kl_free_objective_skips_reference_scoring(self, tiny_train_config, mixed_rewards):
        cfg = tiny_train_config.model_copy(update={"total_steps": 1})
        cfg.objective = cfg.objective.model_copy(update={"beta_knowledge": 0.0})
        reports = train(cfg).reports
        assert reports[0].mean_kl == 0.0


class TestSweep:
    def test_config_for_replaces_one_field(self, tiny_train_config):
        cfg = config_for(tiny_train_config, SweepAxis.BETA_KNOWLEDGE, 0.005)
        assert cfg.objective.beta_knowledge == 0.005
        assert cfg.objective.eps_reasoning == tiny_train_config.objective.eps_reasoning
        assert tiny_train_config.objective.beta_knowledge == 0.001

    def test_config_for_revalidates(self, tiny_train_config):
        with pytest.raises(ValueError):
            config_for(tiny_train_config, "eps_knowledge", 0.9)

    def test_empty_values_rejected(self, tiny_train_config):
        with pytest.raises(ValueError):
            ablation_sweep(tiny_train_config, SweepAxis.EPS_REASONING, [])

    def test_runs_share_first_step_rollouts(self, tiny_train_config, mixed_rewards):
        cfg = tiny_train_config.model_copy(update={"total_steps": 1})
        factory = MagicMock(return_value=None)
        streams = ablation_sweep(cfg, "beta_knowledge", [0.0, 0.005], sink_factory=factory)
        assert list(streams) == [0.0, 0.005]
        assert factory.call_count == 2
        assert factory.call_args_list[1].args[1] == 0.005
        first = [streams[v][0] for v in streams]
        assert first[0].mean_reward == first[1].mean_reward
        assert first[0].mean_entropy == first[1].mean_entropy


@pytest.mark.slow
class TestDeskScaleLearning:
    @pytest.mark.parametrize("seed", [0, 1, 2])
    def test_archer_learns_two_digit_addition(self, seed):
        cfg = load_run_config("desk_addition", overrides=["eval_interval=0"], flags={"seed": seed})
        trainer = Trainer(cfg, workers=4)
        for _ in trainer.run():
            pass
        assert trainer.evaluate_avg_at_1() >= 0.90

    def test_knowledge_kl_slows_entropy_collapse(self):
        base = load_run_config("desk_addition", overrides=["eval_interval=0"])
        rows = []
        for seed in (0, 1, 2):
            cfg = base.model_copy(update={"seed": seed})
            streams = ablation_sweep(cfg, SweepAxis.BETA_KNOWLEDGE, [0.0, 0.001], workers=4)
            for value, reports in streams.items():
                rows.extend({"run_id": f"{seed}-{value}", "sweep_value": value, **r.to_row()} for r in reports)
        summary = sweep_tail_summary(pd.DataFrame(rows)).set_index("sweep_value")
        assert summary.loc[0.0, "mean_entropy"] < summary.loc[0.001, "mean_entropy"]
        assert summary.loc[0.0, "repetition_ratio"] > summary.loc[0.001, "repetition_ratio"]
