"""Entropy statistics at batch, prompt and response level for one training step."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Dict, Sequence, Tuple

import numpy as np
import pandas as pd

from rlvr_lab.objective.entropy import entropy_quantile
from rlvr_lab.pipeline.types import RolloutLogRecord

RESPONSE_COLUMNS = [
    "step", "prompt_id", "response_index", "n_tokens", "mean_entropy",
    "batch_threshold", "response_threshold", "high_frac_batch", "high_frac_response",
]
EXPORT_COLUMNS = ["level"] + RESPONSE_COLUMNS


@dataclass
class EntropyStats:
    step: int
    rho: float
    batch_mean: float
    batch_threshold: float
    prompt_means: Dict[int, float]
    response_means: Dict[Tuple[int, int], float]
    responses: pd.DataFrame
    prompts: pd.DataFrame
    batch_high_frac: float

    @property
    def mean_high_frac_batch(self) -> float:
        return float(self.responses["high_frac_batch"].mean())

    @property
    def mean_high_frac_response(self) -> float:
        return float(self.responses["high_frac_response"].mean())

    def to_frame(self) -> pd.DataFrame:
        """One table for export: the batch row, then prompt rows, then response rows.

        Columns that do not apply at a level (response index and
        per-response quantile above the response level) are left empty.
        """
        batch = pd.DataFrame([{
            "step": self.step,
            "n_tokens": int(self.responses["n_tokens"].sum()),
            "mean_entropy": self.batch_mean,
            "batch_threshold": self.batch_threshold,
            "high_frac_batch": self.batch_high_frac,
        }])
        parts = [
            batch.assign(level="batch"),
            self.prompts.assign(level="prompt"),
            self.responses.assign(level="response"),
        ]
        return pd.concat(parts, ignore_index=True).reindex(columns=EXPORT_COLUMNS)


def entropy_stats(records: Sequence[RolloutLogRecord], rho: float = 0.8) -> EntropyStats:
    """Mean entropies per level plus each response's high-entropy share.

    A token counts as high-entropy when it is >= the threshold, the same
    rule the objective uses to mark reasoning tokens. The share is
    reported against the batch-wide rho-quantile and against the
    response's own rho-quantile.
    """
    records = [r for r in records if r.entropies]
    if not records:
        raise ValueError("entropy_stats needs at least one non-empty record")

    all_ent = np.concatenate([np.asarray(r.entropies, dtype=np.float64) for r in records])
    batch_tau = entropy_quantile(all_ent, rho)

    rows = []
    by_prompt: Dict[int, list] = {}
    response_means: Dict[Tuple[int, int], float] = {}
    for rec in records:
        ent = np.asarray(rec.entropies, dtype=np.float64)
        tau = entropy_quantile(ent, rho)
        response_means[(rec.prompt_id, rec.response_index)] = float(ent.mean())
        by_prompt.setdefault(rec.prompt_id, []).append(ent)
        rows.append({
            "step": rec.step,
            "prompt_id": rec.prompt_id,
            "response_index": rec.response_index,
            "n_tokens": int(ent.size),
            "mean_entropy": float(ent.mean()),
            "batch_threshold": batch_tau,
            "response_threshold": tau,
            "high_frac_batch": float(np.mean(ent >= batch_tau)),
            "high_frac_response": float(np.mean(ent >= tau)),
        })

    prompt_rows = []
    prompt_means: Dict[int, float] = {}
    for pid, chunks in by_prompt.items():
        ent = np.concatenate(chunks)
        prompt_means[pid] = float(ent.mean())
        prompt_rows.append({
            "step": records[0].step,
            "prompt_id": pid,
            "n_tokens": int(ent.size),
            "mean_entropy": prompt_means[pid],
            "batch_threshold": batch_tau,
            "high_frac_batch": float(np.mean(ent >= batch_tau)),
        })

    return EntropyStats(
        step=records[0].step,
        rho=rho,
        batch_mean=float(all_ent.mean()),
        batch_threshold=batch_tau,
        prompt_means=prompt_means,
        response_means=response_means,
        responses=pd.DataFrame(rows, columns=RESPONSE_COLUMNS),
        prompts=pd.DataFrame(prompt_rows, columns=RESPONSE_COLUMNS),
        batch_high_frac=float(np.mean(all_ent >= batch_tau)),
    )
