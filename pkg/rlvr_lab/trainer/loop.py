"""Outer training loop: snapshot, roll out, filter, classify, update."""

from __future__ import annotations

import logging
import time
from dataclasses import asdict, dataclass, field
from typing import Any, Dict, Iterator, List, Optional, Protocol

import numpy as np

from rlvr_lab.analytics.evaluation import evaluate
from rlvr_lab.analytics.regions import ClipRegion, ClipRegionHistogram
from rlvr_lab.analytics.repetition import repetition_ratio
from rlvr_lab.envs.task_io import make_task_set, sample_instance
from rlvr_lab.objective.advantages import assign_advantages
from rlvr_lab.objective.entropy import assign_thresholds
from rlvr_lab.objective.losses import compute_loss
from rlvr_lab.pipeline.rollout import dynamic_sampling_filter, refill_to_batch, rollout_group
from rlvr_lab.pipeline.types import PromptGroup, ResponseRecord, RolloutLogRecord, TokenClass
from rlvr_lab.policy.model import PolicyParams, init_params
from rlvr_lab.policy.sampling import logprobs_under
from rlvr_lab.tensor import no_grad, reset_graph
from rlvr_lab.tensor import ops
from rlvr_lab.trainer.config import TrainConfig
from rlvr_lab.trainer.optimizer import AdamState, clip_grad_norm, optimizer_step
from rlvr_lab.utils.seeding import EVAL_STREAM, INIT_STREAM, ROLLOUT_STREAM, SHUFFLE_STREAM, derive_seed

logger = logging.getLogger(__name__)


@dataclass
class StepReport:
    """Metrics of one training step; every number is finite."""
    step: int
    mean_reward: float
    kept_groups: int
    dropped_groups: int
    prompts_consumed: int
    mean_entropy: float
    repetition_ratio: float
    loss: float
    region_counts: Dict[str, int]
    reasoning_fraction: float
    grad_norm: float
    mean_kl: float
    clip_fraction: float
    skipped: bool = False
    eval_avg_at_1: Optional[float] = None

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)

    def to_row(self) -> Dict[str, Any]:
        """Flat form for CSV and the run ledger."""
        row = {k: v for k, v in asdict(self).items() if k != "region_counts"}
        for region in ClipRegion:
            row[f"region_{region.value}"] = self.region_counts.get(region.value, 0)
        return row

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "StepReport":
        return cls(**{k: v for k, v in data.items() if k in cls.__dataclass_fields__})


class RunSink(Protocol):
    def on_step(self, report: StepReport) -> None: ...

    def on_rollouts(self, records: List[RolloutLogRecord]) -> None: ...

    def on_checkpoint(self, step: int, params: PolicyParams, rng_state: Dict[str, Any], final: bool) -> None: ...


@dataclass
class TrainResult:
    params: PolicyParams
    reference: PolicyParams
    reports: List[StepReport] = field(default_factory=list)


def _token_mean(responses: List[ResponseRecord], attr: str) -> float:
    values = [getattr(s, attr) for r in responses for s in r.steps]
    return float(np.mean(values)) if values else 0.0


class Trainer:
    """Holds pi_theta, the frozen pi_ref and the optimizer state across steps."""

    def __init__(self, cfg: TrainConfig, sink: Optional[RunSink] = None, workers: int = 1):
        self.cfg = cfg
        self.sink = sink
        self.workers = max(1, int(workers))
        self.params = init_params(cfg.model, derive_seed(cfg.seed, INIT_STREAM))
        self.reference = self.params.copy(requires_grad=False)
        self.adam = AdamState(cfg.adam_beta1, cfg.adam_beta2, cfg.adam_eps)
        self._eval_set = None

    def rng_state(self, next_step: int) -> Dict[str, Any]:
        # every random stream is derived from (seed, step), so this is the full RNG state
        return {"master_seed": self.cfg.seed, "next_step": next_step, "adam_step": self.adam.step}

    def _generator(self, step: int, old: PolicyParams):
        cfg = self.cfg

        def generate(k: int) -> PromptGroup:
            inst = sample_instance(cfg.tasks, derive_seed(cfg.seed, ROLLOUT_STREAM, step, k, 0))
            return rollout_group(
                inst, old, cfg.rollouts_per_prompt, cfg.sampling,
                derive_seed(cfg.seed, ROLLOUT_STREAM, step, k, 1), cfg.shaping, prompt_id=k,
            )

        return generate

    def evaluate_avg_at_1(self) -> float:
        cfg = self.cfg
        if self._eval_set is None:
            self._eval_set = make_task_set(cfg.tasks, cfg.eval_instances, derive_seed(cfg.eval_seed, EVAL_STREAM))
        results = evaluate(self.params, self._eval_set, 1, cfg.eval_sampling, cfg.eval_seed, self.workers)
        return float(np.mean([r.avg for r in results]))

    def step(self, step: int) -> StepReport:
        cfg = self.cfg
        started = time.perf_counter()
        old = self.params.copy(requires_grad=False)

        refill = refill_to_batch(
            cfg.batch_size,
            self._generator(step, old),
            dynamic_sampling_filter,
            max_prompts=cfg.refill_budget_factor * cfg.batch_size,
            workers=self.workers,
        )
        seen = [r for g in refill.groups + refill.dropped for r in g.responses]
        base = dict(
            step=step,
            mean_reward=float(np.mean([r.reward for r in seen])) if seen else 0.0,
            kept_groups=len(refill.groups),
            dropped_groups=refill.dropped_count,
            prompts_consumed=refill.prompts_consumed,
            mean_entropy=_token_mean(seen, "entropy"),
            repetition_ratio=float(np.mean([repetition_ratio(r.tokens, cfg.repetition_n) for r in seen])) if seen else 0.0,
        )

        if refill.unlearnable:
            logger.warning(
                "Step %d skipped: no informative group in %d prompts (mean reward %.3f)",
                step, refill.prompts_consumed, base["mean_reward"],
            )
            return StepReport(
                **base, loss=0.0, region_counts={r.value: 0 for r in ClipRegion}, reasoning_fraction=0.0,
                grad_norm=0.0, mean_kl=0.0, clip_fraction=0.0, skipped=True,
            )
        if refill.exhausted:
            logger.info("Step %d: refill budget ran out with %d/%d groups", step, len(refill.groups), cfg.batch_size)

        kept = refill.groups
        assign_advantages(kept, cfg.objective.std_floor)
        assign_thresholds(kept, cfg.objective.rho)
        responses = [r for g in kept for r in g.responses]

        ref_logps: Optional[Dict[int, np.ndarray]] = None
        if cfg.objective.uses_kl:
            with no_grad():
                ref_logps = {
                    id(r): logprobs_under(self.reference, r.prompt, r.tokens, cfg.sampling, r.nuclei).data
                    for r in responses
                }

        shuffle = np.random.default_rng(derive_seed(cfg.seed, SHUFFLE_STREAM, step))
        hist = ClipRegionHistogram()
        losses: List[float] = []
        norms: List[float] = []
        n_tokens = n_clipped = 0
        kl_total = 0.0
        ratios: Dict[int, List[float]] = {}
        regions: Dict[int, List[str]] = {}

        for _ in range(cfg.epochs_per_step):
            order = shuffle.permutation(len(responses))
            for start in range(0, len(order), cfg.minibatch_size):
                minibatch = [responses[i] for i in order[start:start + cfg.minibatch_size]]
                reset_graph()
                self.params.zero_grad()
                logp = ops.concat([
                    logprobs_under(self.params, r.prompt, r.tokens, cfg.sampling, r.nuclei) for r in minibatch
                ])
                ref = np.concatenate([ref_logps[id(r)] for r in minibatch]) if ref_logps is not None else None
                loss, breakdown = compute_loss(minibatch, logp, ref, cfg.objective)
                loss.backward()

                grads = self.params.grads()
                norms.append(clip_grad_norm(grads, cfg.max_grad_norm))
                optimizer_step(self.params, grads, cfg.learning_rate, self.adam)
                losses.append(loss.item())

                pos = 0
                for r in minibatch:
                    part = breakdown[pos:pos + r.length]
                    pos += r.length
                    ratios[id(r)] = [b.ratio for b in part]
                    regions[id(r)] = [b.region.value for b in part]
                for b in breakdown:
                    hist.add(b.region, b.token_class, b.advantage)
                    n_clipped += b.clipped
                    kl_total += b.kl_term
                n_tokens += len(breakdown)

        reasoning = [s.token_class is TokenClass.REASONING for r in responses for s in r.steps]
        report = StepReport(
            **base,
            loss=float(np.mean(losses)),
            region_counts=hist.by_region(),
            reasoning_fraction=float(np.mean(reasoning)),
            grad_norm=float(np.mean(norms)),
            mean_kl=kl_total / n_tokens,
            clip_fraction=n_clipped / n_tokens,
        )

        if cfg.eval_interval and (step + 1) % cfg.eval_interval == 0:
            report.eval_avg_at_1 = self.evaluate_avg_at_1()

        if self.sink is not None and cfg.log_rollouts:
            self.sink.on_rollouts([
                RolloutLogRecord.from_response(step, g, r, ratios.get(id(r)), regions.get(id(r)))
                for g in kept for r in g.responses
            ])

        logger.info(
            "step=%d reward=%.3f kept=%d dropped=%d entropy=%.4f loss=%.5f grad_norm=%.4f (%.2fs)",
            step, report.mean_reward, report.kept_groups, report.dropped_groups,
            report.mean_entropy, report.loss, report.grad_norm, time.perf_counter() - started,
        )
        return report

    def run(self) -> Iterator[StepReport]:
        cfg = self.cfg
        for step in range(cfg.total_steps):
            report = self.step(step)
            if self.sink is not None:
                self.sink.on_step(report)
                if cfg.checkpoint_interval and (step + 1) % cfg.checkpoint_interval == 0:
                    self.sink.on_checkpoint(step + 1, self.params, self.rng_state(step + 1), False)
            yield report
        if self.sink is not None:
            self.sink.on_checkpoint(cfg.total_steps, self.params, self.rng_state(cfg.total_steps), True)


def train(cfg: TrainConfig, sink: Optional[RunSink] = None, workers: int = 1) -> TrainResult:
    trainer = Trainer(cfg, sink=sink, workers=workers)
    reports = list(trainer.run())
    return TrainResult(params=trainer.params, reference=trainer.reference, reports=reports)
