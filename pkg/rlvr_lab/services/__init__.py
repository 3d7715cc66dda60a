"""Services module."""

from rlvr_lab.services.ledger import RunLedger, get_run_ledger, init_run_ledger
from rlvr_lab.services.run_store import (
    RunManifest,
    RunWriter,
    dump_config,
    make_run_dir,
    read_rollouts,
    read_step_reports,
)

__all__ = [
    "RunLedger",
    "get_run_ledger",
    "init_run_ledger",
    "RunManifest",
    "RunWriter",
    "dump_config",
    "make_run_dir",
    "read_rollouts",
    "read_step_reports",
]
