"""Objective hyperparameters for GRPO, DAPO and the dual-token (archer) objective."""

from enum import Enum
from typing import Literal

from pydantic import BaseModel, ConfigDict, Field, model_validator


class Algorithm(str, Enum):
    GRPO = "grpo"
    DAPO = "dapo"
    ARCHER = "archer"


class ObjectiveConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    algorithm: Algorithm = Algorithm.ARCHER
    # grpo
    eps: float = Field(0.2, ge=0.0)
    beta: float = Field(0.001, ge=0.0)
    # dapo clip-higher
    eps_low: float = Field(0.2, ge=0.0)
    eps_high: float = Field(0.28, ge=0.0)
    # archer, per token class
    eps_reasoning: float = Field(0.5, ge=0.0)
    eps_knowledge: float = Field(0.2, ge=0.0)
    beta_reasoning: float = Field(0.0, ge=0.0)
    beta_knowledge: float = Field(0.001, ge=0.0)
    rho: float = Field(0.8, gt=0.0, lt=1.0)

    std_floor: float = Field(1e-6, gt=0.0)
    kl_estimator: Literal["k3", "k1"] = "k3"

    @model_validator(mode="after")
    def _class_ordering(self) -> "ObjectiveConfig":
        if self.eps_reasoning < self.eps_knowledge:
            raise ValueError("eps_reasoning must be >= eps_knowledge")
        if self.beta_knowledge < self.beta_reasoning:
            raise ValueError("beta_knowledge must be >= beta_reasoning")
        return self

    @property
    def uses_kl(self) -> bool:
        if self.algorithm is Algorithm.GRPO:
            return self.beta > 0
        if self.algorithm is Algorithm.ARCHER:
            return self.beta_reasoning > 0 or self.beta_knowledge > 0
        return False
