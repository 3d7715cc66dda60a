"""Training run configuration."""

from typing import List, Optional

from pydantic import BaseModel, ConfigDict, Field, model_validator

from rlvr_lab.envs.rewards import ShapingConfig
from rlvr_lab.envs.task_io import TaskMixEntry
from rlvr_lab.envs.tasks import TaskKind, max_prompt_length
from rlvr_lab.objective.config import ObjectiveConfig
from rlvr_lab.policy.model import ModelConfig
from rlvr_lab.policy.sampling import SamplingConfig


def _default_tasks() -> List[TaskMixEntry]:
    return [TaskMixEntry(kind=TaskKind.ADDITION, difficulty=2)]


class TrainConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    total_steps: int = Field(200, ge=0)
    batch_size: int = Field(8, ge=1, description="kept prompt groups per step")
    minibatch_size: int = Field(32, ge=1, description="responses per optimizer update")
    rollouts_per_prompt: int = Field(8, ge=2)
    epochs_per_step: int = Field(1, ge=1)
    # 0 is accepted for frozen-policy diagnostics
    learning_rate: float = Field(3e-4, ge=0.0)
    adam_beta1: float = Field(0.9, ge=0.0, lt=1.0)
    adam_beta2: float = Field(0.999, ge=0.0, lt=1.0)
    adam_eps: float = Field(1e-8, gt=0.0)
    max_grad_norm: Optional[float] = Field(1.0, gt=0.0)
    seed: int = Field(0, ge=0)
    refill_budget_factor: int = Field(10, ge=1)

    objective: ObjectiveConfig = Field(default_factory=ObjectiveConfig)
    sampling: SamplingConfig = Field(default_factory=SamplingConfig)
    eval_sampling: SamplingConfig = Field(default_factory=lambda: SamplingConfig(temperature=0.8))
    model: ModelConfig = Field(default_factory=ModelConfig)
    tasks: List[TaskMixEntry] = Field(default_factory=_default_tasks, min_length=1)
    shaping: ShapingConfig = Field(default_factory=ShapingConfig)

    repetition_n: int = Field(4, ge=1)
    checkpoint_interval: int = Field(0, ge=0, description="0 writes only the final checkpoint")
    log_rollouts: bool = True
    eval_interval: int = Field(0, ge=0, description="0 disables periodic held-out evaluation")
    eval_instances: int = Field(64, ge=1)
    eval_seed: int = Field(12345, ge=0)

    @model_validator(mode="after")
    def _prompts_fit_context(self) -> "TrainConfig":
        for entry in self.tasks:
            length = max_prompt_length(entry.kind, entry.difficulty)
            if length >= self.model.max_len:
                raise ValueError(
                    f"{entry.kind.value} difficulty {entry.difficulty} prompts take up to {length} tokens, "
                    f"leaving no room to generate under model.max_len {self.model.max_len}"
                )
        return self

    @property
    def responses_per_step(self) -> int:
        return self.batch_size * self.rollouts_per_prompt
