"""Training loop, optimizer and ablation sweeps."""

from rlvr_lab.trainer.config import TrainConfig
from rlvr_lab.trainer.optimizer import AdamState, OptimizerError, clip_grad_norm, global_norm, optimizer_step
from rlvr_lab.trainer.loop import RunSink, StepReport, Trainer, TrainResult, train
from rlvr_lab.trainer.sweep import SweepAxis, ablation_sweep, config_for

__all__ = [
    "TrainConfig",
    "AdamState",
    "OptimizerError",
    "clip_grad_norm",
    "global_norm",
    "optimizer_step",
    "RunSink",
    "StepReport",
    "Trainer",
    "TrainResult",
    "train",
    "SweepAxis",
    "ablation_sweep",
    "config_for",
]
