"""Per-step summaries rebuilt from rollout logs."""

from __future__ import annotations

from collections import defaultdict
from typing import Dict, Iterable, List

import numpy as np
import pandas as pd

from rlvr_lab.analytics.regions import region_histogram
from rlvr_lab.analytics.repetition import DEFAULT_N, repetition_ratio
from rlvr_lab.pipeline.types import RolloutLogRecord


def group_by_step(records: Iterable[RolloutLogRecord]) -> Dict[int, List[RolloutLogRecord]]:
    steps: Dict[int, List[RolloutLogRecord]] = defaultdict(list)
    for rec in records:
        steps[rec.step].append(rec)
    return dict(sorted(steps.items()))


def step_summary(records: Iterable[RolloutLogRecord], n: int = DEFAULT_N) -> pd.DataFrame:
    """One row per step: reward, accuracy, token-mean entropy, repetition and region counts."""
    rows = []
    for step, recs in group_by_step(records).items():
        entropies = np.concatenate([np.asarray(r.entropies, dtype=np.float64) for r in recs])
        row = {
            "step": step,
            "n_responses": len(recs),
            "mean_reward": float(np.mean([r.reward for r in recs])),
            "accuracy": float(np.mean([r.correct for r in recs])),
            "mean_entropy": float(entropies.mean()) if entropies.size else 0.0,
            "repetition_ratio": float(np.mean([repetition_ratio(r.tokens, n) for r in recs])),
            "mean_length": float(np.mean([len(r.tokens) for r in recs])),
        }
        for region, count in region_histogram(recs).by_region().items():
            row[f"region_{region}"] = count
        rows.append(row)
    return pd.DataFrame(rows)


def sweep_tail_summary(
    frame: pd.DataFrame,
    tail_fraction: float = 0.1,
    columns: tuple = ("mean_entropy", "repetition_ratio", "mean_reward"),
) -> pd.DataFrame:
    """Per sweep value, means over the last ``tail_fraction`` of each run's steps.

    ``frame`` is the long step table from RunLedger.step_frame. Run means
    are averaged across runs sharing a sweep value (seeds).
    """
    if frame.empty:
        return pd.DataFrame(columns=["sweep_value", "n_runs", *columns])
    per_run = []
    for run_id, df in frame.groupby("run_id", sort=False):
        df = df.sort_values("step")
        tail = df.iloc[-max(1, int(np.ceil(len(df) * tail_fraction))):]
        per_run.append({"sweep_value": df["sweep_value"].iloc[0], "run_id": run_id,
                        **{c: float(tail[c].mean()) for c in columns}})
    runs = pd.DataFrame(per_run)
    out = runs.groupby("sweep_value", sort=True).agg(
        n_runs=("run_id", "count"), **{c: (c, "mean") for c in columns}
    )
    return out.reset_index()
