from dataclasses import asdict, dataclass, field
from enum import Enum
from typing import Any, Dict, List, Optional, Tuple

import numpy as np

from rlvr_lab.envs.tasks import TaskInstance


class TokenClass(str, Enum):
    """Entropy class of a generated token."""
    REASONING = "reasoning"
    KNOWLEDGE = "knowledge"


@dataclass
class TokenStep:
    """One generated token with its rollout-time statistics."""
    token: int
    logprob_old: float
    entropy: float
    token_class: Optional[TokenClass] = None
    # token ids inside the top-p nucleus at sampling time; None without truncation
    nucleus: Optional[Tuple[int, ...]] = None


@dataclass
class ResponseRecord:
    """A sampled completion. Advantage and threshold are filled by the objective."""
    steps: List[TokenStep]
    reward: float
    correct: bool
    truncated: bool
    prompt: tuple = ()
    prompt_id: int = 0
    response_index: int = 0
    advantage: Optional[float] = None
    entropy_threshold: Optional[float] = None

    def __post_init__(self) -> None:
        if not self.steps:
            raise ValueError("a response needs at least one token")

    @property
    def length(self) -> int:
        return len(self.steps)

    @property
    def tokens(self) -> List[int]:
        return [s.token for s in self.steps]

    @property
    def logprobs_old(self) -> np.ndarray:
        return np.array([s.logprob_old for s in self.steps], dtype=np.float64)

    @property
    def entropies(self) -> np.ndarray:
        return np.array([s.entropy for s in self.steps], dtype=np.float64)

    @property
    def token_classes(self) -> List[Optional[TokenClass]]:
        return [s.token_class for s in self.steps]

    @property
    def nuclei(self) -> List[Optional[Tuple[int, ...]]]:
        return [s.nucleus for s in self.steps]


@dataclass
class PromptGroup:
    """All G responses drawn for one prompt."""
    instance: TaskInstance
    responses: List[ResponseRecord]
    prompt_id: int = 0

    @property
    def size(self) -> int:
        return len(self.responses)

    @property
    def rewards(self) -> List[float]:
        return [r.reward for r in self.responses]

    @property
    def correct_count(self) -> int:
        return sum(1 for r in self.responses if r.correct)


@dataclass
class RolloutLogRecord:
    """One line of rollouts.jsonl."""
    step: int
    prompt_id: int
    response_index: int
    tokens: List[int]
    logprobs_old: List[float]
    entropies: List[float]
    reward: float
    advantage: Optional[float]
    entropy_threshold: Optional[float]
    token_classes: List[Optional[str]]
    task_kind: str = ""
    correct: bool = False
    truncated: bool = False
    ratios: List[float] = field(default_factory=list)
    regions: List[str] = field(default_factory=list)

    @classmethod
    def from_response(
        cls,
        step: int,
        group: PromptGroup,
        response: ResponseRecord,
        ratios: Optional[List[float]] = None,
        regions: Optional[List[str]] = None,
    ) -> "RolloutLogRecord":
        return cls(
            step=step,
            prompt_id=group.prompt_id,
            response_index=response.response_index,
            tokens=response.tokens,
            logprobs_old=[s.logprob_old for s in response.steps],
            entropies=[s.entropy for s in response.steps],
            reward=response.reward,
            advantage=response.advantage,
            entropy_threshold=response.entropy_threshold,
            token_classes=[c.value if c is not None else None for c in response.token_classes],
            task_kind=group.instance.task_kind.value,
            correct=response.correct,
            truncated=response.truncated,
            ratios=list(ratios or []),
            regions=list(regions or []),
        )

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "RolloutLogRecord":
        known = {k: v for k, v in data.items() if k in cls.__dataclass_fields__}
        return cls(**known)
