"""Clip-region histograms over trained tokens."""

from __future__ import annotations

from collections import Counter
from typing import Iterable, Optional

import pandas as pd

from rlvr_lab.objective.regions import ClipRegion, clip_region, sign_label
from rlvr_lab.pipeline.types import RolloutLogRecord, TokenClass

__all__ = ["ClipRegion", "ClipRegionHistogram", "clip_region", "region_histogram"]


class ClipRegionHistogram:
    """Token counts per (region, token class, advantage sign)."""

    def __init__(self) -> None:
        self.counts: Counter = Counter()

    def add(self, region: ClipRegion, token_class: Optional[TokenClass], advantage: float) -> None:
        cls = token_class.value if token_class is not None else "unclassified"
        self.counts[(ClipRegion(region).value, cls, sign_label(advantage))] += 1

    @property
    def total(self) -> int:
        return sum(self.counts.values())

    def by_region(self) -> dict[str, int]:
        out = {r.value: 0 for r in ClipRegion}
        for (region, _, _), n in self.counts.items():
            out[region] += n
        return out

    def to_frame(self) -> pd.DataFrame:
        rows = [
            {"region": region, "token_class": cls, "advantage_sign": sign, "count": n}
            for (region, cls, sign), n in sorted(self.counts.items())
        ]
        return pd.DataFrame(rows, columns=["region", "token_class", "advantage_sign", "count"])


def region_histogram(records: Iterable[RolloutLogRecord]) -> ClipRegionHistogram:
    """Rebuild the histogram from logged regions; records without regions add nothing."""
    hist = ClipRegionHistogram()
    for rec in records:
        for region, cls in zip(rec.regions, rec.token_classes):
            hist.add(ClipRegion(region), TokenClass(cls) if cls else None, rec.advantage or 0.0)
    return hist
