"""Synthetic verifiable-reward tasks."""

from rlvr_lab.envs.vocab import VOCAB, STOP_ID, Vocabulary
from rlvr_lab.envs.tasks import (
    DIFFICULTY_RANGE,
    TaskError,
    TaskInstance,
    TaskKind,
    generate_instance,
    solve,
)
from rlvr_lab.envs.verifier import canonicalize, extract_answer, is_equivalent, random_guess_baseline
from rlvr_lab.envs.rewards import RewardOutcome, ShapingConfig, reward
from rlvr_lab.envs.task_io import (
    TaskMixEntry,
    export_task_set,
    import_task_set,
    make_task_set,
    sample_instance,
)

__all__ = [
    "VOCAB",
    "STOP_ID",
    "Vocabulary",
    "DIFFICULTY_RANGE",
    "TaskError",
    "TaskInstance",
    "TaskKind",
    "generate_instance",
    "solve",
    "canonicalize",
    "extract_answer",
    "is_equivalent",
    "random_guess_baseline",
    "RewardOutcome",
    "ShapingConfig",
    "reward",
    "TaskMixEntry",
    "export_task_set",
    "import_task_set",
    "make_task_set",
    "sample_instance",
]
