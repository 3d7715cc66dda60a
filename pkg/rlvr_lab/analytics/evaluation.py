"""avg@K / pass@K evaluation of a policy on a task set."""

from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import List, Literal, Optional, Sequence

import numpy as np
import pandas as pd

from rlvr_lab.envs.rewards import reward
from rlvr_lab.envs.tasks import TaskInstance
from rlvr_lab.envs.verifier import random_guess_baseline
from rlvr_lab.policy.model import PolicyParams
from rlvr_lab.policy.sampling import SamplingConfig, sample_response
from rlvr_lab.utils.seeding import derive_seed

logger = logging.getLogger(__name__)

Estimator = Literal["empirical", "unbiased"]

EVAL_COLUMNS = ["task_kind", "n_instances", "k", "avg_at_k", "pass_at_k", "random_baseline"]


def avg_at_k(flags: Sequence[bool]) -> float:
    if len(flags) < 1:
        raise ValueError("avg@K needs K >= 1 samples")
    return float(sum(bool(f) for f in flags)) / len(flags)


def pass_at_k(flags: Sequence[bool]) -> int:
    if len(flags) < 1:
        raise ValueError("pass@K needs K >= 1 samples")
    return int(any(flags))


def pass_at_k_unbiased(n: int, c: int, k: int) -> float:
    """1 - C(n - c, k) / C(n, k), evaluated as a running product."""
    if not 0 <= c <= n or k < 1:
        raise ValueError(f"invalid counts n={n}, c={c}, k={k}")
    if n - c < k:
        return 1.0
    return float(1.0 - np.prod(1.0 - k / np.arange(n - c + 1, n + 1)))


@dataclass
class InstanceEval:
    instance: TaskInstance
    flags: List[bool]

    @property
    def avg(self) -> float:
        return avg_at_k(self.flags)

    @property
    def passed(self) -> int:
        return pass_at_k(self.flags)


def evaluate(
    params: PolicyParams,
    instances: Sequence[TaskInstance],
    k: int,
    sampling: SamplingConfig,
    seed: int,
    workers: int = 1,
) -> List[InstanceEval]:
    """Draw K samples per instance; sample j of instance i uses seed (seed, i, j)."""
    if k < 1:
        raise ValueError("k must be >= 1")
    frozen = params.copy(requires_grad=False)

    def _one(i: int) -> InstanceEval:
        inst = instances[i]
        flags = []
        for j in range(k):
            s = sample_response(frozen, inst.prompt, sampling, derive_seed(seed, i, j))
            flags.append(reward(list(inst.prompt) + s.tokens, inst.ground_truth, s.truncated).correct)
        return InstanceEval(inst, flags)

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_one, range(len(instances))))
    else:
        results = [_one(i) for i in range(len(instances))]
    logger.debug("Evaluated %d instances at K=%d", len(results), k)
    return results


def eval_table(
    results: Sequence[InstanceEval],
    max_new_tokens: int,
    estimator: Estimator = "empirical",
    k: Optional[int] = None,
) -> pd.DataFrame:
    """Rows per task kind plus an ``overall`` row of instance means.

    ``empirical`` pass@K is the any-correct indicator over the K drawn
    samples; ``unbiased`` uses the combinatorial estimator with n = the
    drawn sample count and the requested k (defaults to n).
    """
    if not results:
        raise ValueError("no evaluation results")
    rows = []
    for r in results:
        n = len(r.flags)
        k_eff = k or n
        if estimator == "unbiased":
            passed = pass_at_k_unbiased(n, sum(r.flags), k_eff)
        else:
            passed = float(r.passed)
        rows.append({
            "task_kind": r.instance.task_kind.value,
            "k": k_eff,
            "avg": r.avg,
            "pass": passed,
            "baseline": random_guess_baseline(r.instance, max_new_tokens),
        })
    frame = pd.DataFrame(rows)

    def _summarise(df: pd.DataFrame, label: str) -> dict:
        return {
            "task_kind": label,
            "n_instances": int(len(df)),
            "k": int(df["k"].iloc[0]),
            "avg_at_k": float(df["avg"].mean()),
            "pass_at_k": float(df["pass"].mean()),
            "random_baseline": float(df["baseline"].mean()),
        }

    out = [_summarise(df, kind) for kind, df in frame.groupby("task_kind", sort=True)]
    out.append(_summarise(frame, "overall"))
    return pd.DataFrame(out, columns=EVAL_COLUMNS)
