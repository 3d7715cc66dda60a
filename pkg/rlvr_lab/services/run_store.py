"""Run directories: manifest, config snapshot, report streams and checkpoints."""

from __future__ import annotations

import json
import logging
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Dict, List, Optional

import pandas as pd
import yaml
from pydantic import BaseModel, Field

from rlvr_lab import __version__
from rlvr_lab.pipeline.types import RolloutLogRecord
from rlvr_lab.policy.checkpoint import save_checkpoint
from rlvr_lab.policy.model import PolicyParams
from rlvr_lab.services.ledger import RunLedger
from rlvr_lab.trainer.config import TrainConfig
from rlvr_lab.trainer.loop import StepReport

logger = logging.getLogger(__name__)

MANIFEST = "manifest.json"
CONFIG_SNAPSHOT = "config.yaml"
STEP_REPORTS_JSONL = "step_reports.jsonl"
STEP_REPORTS_CSV = "step_reports.csv"
ROLLOUTS = "rollouts.jsonl"
CHECKPOINT_DIR = "checkpoints"
FINAL_CHECKPOINT = "final.ckpt"


class RunManifest(BaseModel):
    run_id: str
    config: Dict[str, Any]
    master_seed: int
    code_version: str = __version__
    started_at: str
    ended_at: Optional[str] = None
    status: str = "running"
    sweep_axis: Optional[str] = None
    sweep_value: Optional[float] = None
    paths: Dict[str, str] = Field(default_factory=dict)


def _now() -> str:
    return datetime.now(timezone.utc).isoformat()


def make_run_dir(root: Path, seed: int, algorithm: str, now: Optional[datetime] = None) -> Path:
    """Fresh directory named by timestamp, seed and algorithm; never reuses an existing one."""
    stamp = (now or datetime.now()).strftime("%Y%m%d-%H%M%S-%f")
    base = Path(root) / f"{stamp}-seed{seed}-{algorithm}"
    path, n = base, 1
    while path.exists():
        path = base.with_name(f"{base.name}-{n}")
        n += 1
    path.mkdir(parents=True)
    return path


def dump_config(cfg: TrainConfig) -> str:
    data = {"schema_version": 1, **cfg.model_dump(mode="json")}
    return yaml.safe_dump(data, sort_keys=False)


class RunWriter:
    """Writes everything a training run produces into its directory.

    Implements the trainer's sink interface; optionally mirrors run and
    step rows into a RunLedger.
    """

    def __init__(
        self,
        run_dir: Path,
        cfg: TrainConfig,
        ledger: Optional[RunLedger] = None,
        sweep_id: Optional[str] = None,
        sweep_axis: Optional[str] = None,
        sweep_value: Optional[float] = None,
    ):
        self.run_dir = Path(run_dir)
        self.cfg = cfg
        self.ledger = ledger
        self.reports: List[StepReport] = []
        self.manifest = RunManifest(
            run_id=self.run_dir.name,
            config=cfg.model_dump(mode="json"),
            master_seed=cfg.seed,
            started_at=_now(),
            sweep_axis=sweep_axis,
            sweep_value=sweep_value,
        )
        (self.run_dir / CHECKPOINT_DIR).mkdir(parents=True, exist_ok=True)
        (self.run_dir / CONFIG_SNAPSHOT).write_text(dump_config(cfg), encoding="utf-8")
        (self.run_dir / STEP_REPORTS_JSONL).touch()
        if cfg.log_rollouts:
            (self.run_dir / ROLLOUTS).touch()
        self._write_manifest()
        if ledger is not None:
            ledger.start_run(
                self.manifest.run_id, str(self.run_dir), cfg.objective.algorithm.value, cfg.seed,
                self.manifest.config, sweep_id=sweep_id, sweep_axis=sweep_axis, sweep_value=sweep_value,
            )
        logger.info("Run directory %s", self.run_dir)

    @property
    def run_id(self) -> str:
        return self.manifest.run_id

    def _write_manifest(self) -> None:
        (self.run_dir / MANIFEST).write_text(self.manifest.model_dump_json(indent=2), encoding="utf-8")

    def on_step(self, report: StepReport) -> None:
        self.reports.append(report)
        with (self.run_dir / STEP_REPORTS_JSONL).open("a", encoding="utf-8") as fh:
            fh.write(json.dumps(report.to_dict()) + "\n")
        if self.ledger is not None:
            self.ledger.record_step(self.run_id, report.to_row())

    def on_rollouts(self, records: List[RolloutLogRecord]) -> None:
        with (self.run_dir / ROLLOUTS).open("a", encoding="utf-8") as fh:
            for rec in records:
                fh.write(json.dumps(rec.to_dict()) + "\n")

    def on_checkpoint(self, step: int, params: PolicyParams, rng_state: Dict[str, Any], final: bool) -> None:
        name = FINAL_CHECKPOINT if final else f"step_{step:06d}.ckpt"
        path = save_checkpoint(self.run_dir / CHECKPOINT_DIR / name, params, rng_state)
        self.manifest.paths[f"checkpoint_{'final' if final else step}"] = str(path.relative_to(self.run_dir))

    def finalize(self, status: str = "completed") -> RunManifest:
        """Write the CSV summary, close the manifest and the ledger entry."""
        columns = list(StepReport.__dataclass_fields__)
        frame = pd.DataFrame([r.to_row() for r in self.reports])
        if frame.empty:
            frame = pd.DataFrame(columns=[c for c in columns if c != "region_counts"])
        frame.to_csv(self.run_dir / STEP_REPORTS_CSV, index=False)

        self.manifest.paths.update({
            "config": CONFIG_SNAPSHOT,
            "step_reports": STEP_REPORTS_JSONL,
            "step_reports_csv": STEP_REPORTS_CSV,
        })
        if self.cfg.log_rollouts:
            self.manifest.paths["rollouts"] = ROLLOUTS
        self.manifest.status = status
        self.manifest.ended_at = _now()
        self._write_manifest()
        if self.ledger is not None:
            self.ledger.finish_run(self.run_id, status)
        return self.manifest


def read_step_reports(path: Path) -> List[StepReport]:
    with Path(path).open(encoding="utf-8") as fh:
        return [StepReport.from_dict(json.loads(line)) for line in fh if line.strip()]


def read_rollouts(path: Path) -> List[RolloutLogRecord]:
    with Path(path).open(encoding="utf-8") as fh:
        return [RolloutLogRecord.from_dict(json.loads(line)) for line in fh if line.strip()]
