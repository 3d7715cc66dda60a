"""Run Ledger - SQLite bookkeeping of training runs and their step reports."""

from datetime import datetime
from typing import Any, Iterable, Optional

import pandas as pd
from sqlalchemy import (
    Column, Integer, String, Float, DateTime, JSON, Boolean, ForeignKey,
    create_engine
)
from sqlalchemy.orm import declarative_base, sessionmaker

Base = declarative_base()


class RunRecord(Base):
    """One training run (one sweep point or one plain train)."""

    __tablename__ = "runs"

    id = Column(String, primary_key=True)
    run_dir = Column(String)
    algorithm = Column(String, index=True)
    seed = Column(Integer)
    sweep_id = Column(String, nullable=True, index=True)
    sweep_axis = Column(String, nullable=True)
    sweep_value = Column(Float, nullable=True)
    status = Column(String, default="running")
    config = Column(JSON)
    started_at = Column(DateTime, default=datetime.utcnow)
    ended_at = Column(DateTime, nullable=True)


class StepRecord(Base):
    """One StepReport row."""

    __tablename__ = "step_reports"

    id = Column(Integer, primary_key=True)
    run_id = Column(String, ForeignKey("runs.id"), index=True)
    step = Column(Integer)
    mean_reward = Column(Float)
    mean_entropy = Column(Float)
    repetition_ratio = Column(Float)
    loss = Column(Float)
    kept_groups = Column(Integer)
    dropped_groups = Column(Integer)
    reasoning_fraction = Column(Float)
    grad_norm = Column(Float)
    mean_kl = Column(Float)
    clip_fraction = Column(Float)
    skipped = Column(Boolean, default=False)
    eval_avg_at_1 = Column(Float, nullable=True)
    # full flat report, including region counts
    payload = Column(JSON)


_STEP_FIELDS = [
    "mean_reward", "mean_entropy", "repetition_ratio", "loss", "kept_groups", "dropped_groups",
    "reasoning_fraction", "grad_norm", "mean_kl", "clip_fraction", "skipped", "eval_avg_at_1",
]


class RunLedger:
    """Service for recording runs and querying their reports across a sweep."""

    def __init__(self, db_url: str):
        self.engine = create_engine(db_url)
        Base.metadata.create_all(self.engine)
        self.Session = sessionmaker(bind=self.engine)

    def start_run(
        self,
        run_id: str,
        run_dir: str,
        algorithm: str,
        seed: int,
        config: dict,
        sweep_id: Optional[str] = None,
        sweep_axis: Optional[str] = None,
        sweep_value: Optional[float] = None,
    ) -> str:
        with self.Session() as session:
            session.add(RunRecord(
                id=run_id,
                run_dir=run_dir,
                algorithm=algorithm,
                seed=seed,
                config=config,
                sweep_id=sweep_id,
                sweep_axis=sweep_axis,
                sweep_value=sweep_value,
            ))
            session.commit()
        return run_id

    def record_step(self, run_id: str, row: dict[str, Any]):
        """Store a flat StepReport row (StepReport.to_row())."""
        with self.Session() as session:
            session.add(StepRecord(
                run_id=run_id,
                step=row["step"],
                payload=row,
                **{k: row.get(k) for k in _STEP_FIELDS},
            ))
            session.commit()

    def finish_run(self, run_id: str, status: str = "completed"):
        with self.Session() as session:
            run = session.get(RunRecord, run_id)
            if run:
                run.status = status
                run.ended_at = datetime.utcnow()
                session.commit()

    def get_run(self, run_id: str) -> Optional[dict]:
        with self.Session() as session:
            run = session.get(RunRecord, run_id)
            if run:
                return {
                    "id": run.id,
                    "run_dir": run.run_dir,
                    "algorithm": run.algorithm,
                    "seed": run.seed,
                    "sweep_id": run.sweep_id,
                    "sweep_axis": run.sweep_axis,
                    "sweep_value": run.sweep_value,
                    "status": run.status,
                    "started_at": run.started_at.isoformat() if run.started_at else None,
                    "ended_at": run.ended_at.isoformat() if run.ended_at else None,
                }
            return None

    def list_runs(self, sweep_id: Optional[str] = None) -> list[dict]:
        with self.Session() as session:
            query = session.query(RunRecord.id)
            if sweep_id:
                query = query.filter(RunRecord.sweep_id == sweep_id)
            ids = [row.id for row in query.order_by(RunRecord.started_at, RunRecord.id).all()]
        return [self.get_run(i) for i in ids]

    def step_frame(self, run_ids: Iterable[str]) -> pd.DataFrame:
        """Long-format table of every step of the given runs, with sweep coordinates."""
        run_ids = list(run_ids)
        with self.Session() as session:
            rows = (
                session.query(StepRecord, RunRecord)
                .join(RunRecord, StepRecord.run_id == RunRecord.id)
                .filter(StepRecord.run_id.in_(run_ids))
                .order_by(RunRecord.sweep_value, StepRecord.run_id, StepRecord.step)
                .all()
            )
            records = [
                {
                    "run_id": run.id,
                    "sweep_axis": run.sweep_axis,
                    "sweep_value": run.sweep_value,
                    "algorithm": run.algorithm,
                    "seed": run.seed,
                    **step.payload,
                }
                for step, run in rows
            ]
        return pd.DataFrame(records)


# Global instance
_run_ledger: Optional[RunLedger] = None


def init_run_ledger(db_url: str) -> RunLedger:
    """Initialize the global run ledger."""
    global _run_ledger
    _run_ledger = RunLedger(db_url)
    return _run_ledger


def get_run_ledger() -> Optional[RunLedger]:
    """Get the global run ledger instance."""
    return _run_ledger
