"""Measurement helpers: entropy structure, token frequency, repetition, clip regions, pass@K."""

from rlvr_lab.analytics.entropy_stats import EntropyStats, entropy_stats
from rlvr_lab.analytics.evaluation import (
    InstanceEval,
    avg_at_k,
    eval_table,
    evaluate,
    pass_at_k,
    pass_at_k_unbiased,
)
from rlvr_lab.analytics.frequency import FrequencyTables, token_frequency_report
from rlvr_lab.analytics.regions import ClipRegion, ClipRegionHistogram, clip_region, region_histogram
from rlvr_lab.analytics.repetition import repetition_ratio
from rlvr_lab.analytics.summary import group_by_step, step_summary, sweep_tail_summary

__all__ = [
    "EntropyStats",
    "entropy_stats",
    "InstanceEval",
    "avg_at_k",
    "eval_table",
    "evaluate",
    "pass_at_k",
    "pass_at_k_unbiased",
    "FrequencyTables",
    "token_frequency_report",
    "ClipRegion",
    "ClipRegionHistogram",
    "clip_region",
    "region_histogram",
    "repetition_ratio",
    "group_by_step",
    "step_summary",
    "sweep_tail_summary",
]
