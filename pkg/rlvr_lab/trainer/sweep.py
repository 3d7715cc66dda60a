"""Single-axis ablation sweeps over the dual-token objective."""

from __future__ import annotations

import logging
from enum import Enum
from typing import Callable, Dict, List, Optional, Sequence

from rlvr_lab.trainer.config import TrainConfig
from rlvr_lab.trainer.loop import RunSink, StepReport, train

logger = logging.getLogger(__name__)


class SweepAxis(str, Enum):
    BETA_KNOWLEDGE = "beta_knowledge"
    EPS_KNOWLEDGE = "eps_knowledge"
    EPS_REASONING = "eps_reasoning"


def config_for(base_cfg: TrainConfig, axis: SweepAxis, value: float) -> TrainConfig:
    """Copy of base_cfg with one objective field replaced, re-validated."""
    axis = SweepAxis(axis)
    objective = base_cfg.objective.model_dump()
    objective[axis.value] = float(value)
    data = base_cfg.model_dump()
    data["objective"] = objective
    return TrainConfig.model_validate(data)


def ablation_sweep(
    base_cfg: TrainConfig,
    axis: SweepAxis,
    values: Sequence[float],
    sink_factory: Optional[Callable[[TrainConfig, float], Optional[RunSink]]] = None,
    workers: int = 1,
) -> Dict[float, List[StepReport]]:
    """Train once per value with the shared master seed, so rollouts stay sample-aligned."""
    if not values:
        raise ValueError("sweep needs at least one value")
    axis = SweepAxis(axis)
    configs = [(float(v), config_for(base_cfg, axis, v)) for v in values]

    streams: Dict[float, List[StepReport]] = {}
    for value, cfg in configs:
        logger.info("Sweep %s=%g (seed %d, %d steps)", axis.value, value, cfg.seed, cfg.total_steps)
        sink = sink_factory(cfg, value) if sink_factory is not None else None
        streams[value] = train(cfg, sink=sink, workers=workers).reports
    return streams
