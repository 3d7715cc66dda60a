"""Task mixes, reproducible task sets and their JSONL export."""

from __future__ import annotations

import json
import logging
from pathlib import Path
from typing import Iterable, Sequence, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator

from rlvr_lab.envs.tasks import TaskError, TaskInstance, TaskKind, check_difficulty, generate_instance
from rlvr_lab.utils.seeding import derive_seed

logger = logging.getLogger(__name__)


class TaskMixEntry(BaseModel):
    """One task kind at one difficulty with a sampling weight."""

    model_config = ConfigDict(extra="forbid")

    kind: TaskKind
    difficulty: int = Field(..., ge=1)
    weight: float = Field(1.0, gt=0.0)

    @model_validator(mode="after")
    def _difficulty_in_range(self) -> "TaskMixEntry":
        try:
            check_difficulty(self.kind, self.difficulty)
        except TaskError as e:
            raise ValueError(str(e)) from e
        return self


def sample_instance(mix: Sequence[TaskMixEntry], rng_seed: int) -> TaskInstance:
    """Pick a mix entry by weight and generate an instance, both from one seed."""
    if not mix:
        raise TaskError("task mix is empty")
    rng = np.random.default_rng(rng_seed)
    weights = np.array([e.weight for e in mix], dtype=np.float64)
    entry = mix[int(rng.choice(len(mix), p=weights / weights.sum()))]
    return generate_instance(entry.kind, entry.difficulty, int(rng.integers(0, 2**31 - 1)))


def make_task_set(mix: Sequence[TaskMixEntry], n: int, seed: int) -> list[TaskInstance]:
    return [sample_instance(mix, derive_seed(seed, i)) for i in range(n)]


def export_task_set(instances: Iterable[TaskInstance], path: Union[str, Path]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8") as fh:
        for inst in instances:
            fh.write(json.dumps({
                "task_kind": inst.task_kind.value,
                "difficulty": inst.difficulty,
                "seed": inst.seed,
                "prompt_text": inst.prompt_text,
                "ground_truth": inst.ground_truth,
            }) + "\n")
    return path


def import_task_set(path: Union[str, Path]) -> list[TaskInstance]:
    """Regenerate instances from (kind, difficulty, seed) and check them against the file."""
    instances: list[TaskInstance] = []
    with Path(path).open(encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                row = json.loads(line)
                inst = generate_instance(row["task_kind"], int(row["difficulty"]), int(row["seed"]))
            except (json.JSONDecodeError, KeyError, TypeError) as e:
                raise TaskError(f"{path}:{lineno}: malformed task record ({e})") from e
            if inst.prompt_text != row.get("prompt_text") or inst.ground_truth != row.get("ground_truth"):
                raise TaskError(f"{path}:{lineno}: record does not match its regenerated instance")
            instances.append(inst)
    logger.debug("Imported %d task instances from %s", len(instances), path)
    return instances
