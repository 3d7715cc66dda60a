"""Synthetic verifiable tasks: prompt generation and ground-truth answers."""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Any, Sequence, Union

import numpy as np

from rlvr_lab.envs.vocab import BOS, DELIMITER, VOCAB, Vocabulary


class TaskError(ValueError):
    """Unknown task kind or difficulty outside the task's range."""


class TaskKind(str, Enum):
    ADDITION = "addition"
    MULTIPLICATION = "multiplication"
    SORT = "sort"
    REVERSE = "reverse"


# Inclusive difficulty ranges: operand digits for arithmetic, list length for sort/reverse.
DIFFICULTY_RANGE: dict[TaskKind, tuple[int, int]] = {
    TaskKind.ADDITION: (1, 4),
    TaskKind.MULTIPLICATION: (1, 3),
    TaskKind.SORT: (1, 8),
    TaskKind.REVERSE: (1, 8),
}

_LETTERS = "abcdefghijkl"
_OPERATOR = {
    TaskKind.ADDITION: "+",
    TaskKind.MULTIPLICATION: "*",
    TaskKind.SORT: "^",
    TaskKind.REVERSE: "~",
}

Operands = tuple[Union[int, str], ...]


@dataclass(frozen=True)
class TaskInstance:
    """One prompt with its canonical answer."""
    prompt: tuple[int, ...]
    ground_truth: str
    task_kind: TaskKind
    difficulty: int
    seed: int
    operands: Operands = ()

    @property
    def prompt_text(self) -> str:
        return VOCAB.decode(self.prompt)


def parse_task_kind(kind: Union[str, TaskKind]) -> TaskKind:
    try:
        return TaskKind(kind)
    except ValueError:
        raise TaskError(f"unknown task kind: {kind!r}") from None


def check_difficulty(kind: TaskKind, difficulty: int) -> None:
    lo, hi = DIFFICULTY_RANGE[kind]
    if not lo <= int(difficulty) <= hi:
        raise TaskError(f"difficulty {difficulty} outside [{lo}, {hi}] for {kind.value}")


def max_prompt_length(task_kind: Union[str, TaskKind], difficulty: int) -> int:
    """Longest encoded prompt, in tokens, that (kind, difficulty) can produce."""
    kind = parse_task_kind(task_kind)
    check_difficulty(kind, difficulty)
    if kind in (TaskKind.ADDITION, TaskKind.MULTIPLICATION):
        return 2 * int(difficulty) + 3
    return int(difficulty) + 3


def solve(task_kind: Union[str, TaskKind], operands: Sequence[Any]) -> str:
    """Canonical answer string for the given operands."""
    kind = parse_task_kind(task_kind)
    if kind is TaskKind.ADDITION:
        a, b = operands
        return str(int(a) + int(b))
    if kind is TaskKind.MULTIPLICATION:
        a, b = operands
        return str(int(a) * int(b))
    if kind is TaskKind.SORT:
        return "".join(sorted(str(s) for s in operands))
    return "".join(str(s) for s in reversed(operands))


def _draw_operand(rng: np.random.Generator, digits: int) -> int:
    if digits == 1:
        return int(rng.integers(0, 10))
    return int(rng.integers(10 ** (digits - 1), 10 ** digits))


def render_prompt(kind: TaskKind, operands: Operands) -> str:
    op = _OPERATOR[kind]
    if kind in (TaskKind.ADDITION, TaskKind.MULTIPLICATION):
        body = f"{operands[0]}{op}{operands[1]}"
    else:
        body = op + "".join(str(s) for s in operands)
    return f"{BOS}{body}{DELIMITER}"


def generate_instance(
    task_kind: Union[str, TaskKind],
    difficulty: int,
    rng_seed: int,
    vocab: Vocabulary = VOCAB,
) -> TaskInstance:
    """Deterministically build one instance from (kind, difficulty, seed).

    Arithmetic prompts render as ``<bos>27+58=``; list prompts as
    ``<bos>^dcb=`` (sort) or ``<bos>~abc=`` (reverse) with distinct letters.
    """
    kind = parse_task_kind(task_kind)
    check_difficulty(kind, difficulty)
    rng = np.random.default_rng(rng_seed)

    operands: Operands
    if kind in (TaskKind.ADDITION, TaskKind.MULTIPLICATION):
        operands = (_draw_operand(rng, difficulty), _draw_operand(rng, difficulty))
    else:
        picks = rng.choice(len(_LETTERS), size=difficulty, replace=False)
        operands = tuple(_LETTERS[int(i)] for i in picks)

    return TaskInstance(
        prompt=tuple(vocab.encode(render_prompt(kind, operands))),
        ground_truth=solve(kind, operands),
        task_kind=kind,
        difficulty=int(difficulty),
        seed=int(rng_seed),
        operands=operands,
    )
