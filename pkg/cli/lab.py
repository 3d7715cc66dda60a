"""Command-line entry point: train, sweep, eval, analyze, gradcheck."""

import argparse
import logging
import sys
from datetime import datetime
from pathlib import Path
from typing import List, Optional, Sequence

import pandas as pd

from rlvr_lab.analytics import (
    entropy_stats,
    eval_table,
    evaluate,
    group_by_step,
    region_histogram,
    step_summary,
    sweep_tail_summary,
    token_frequency_report,
)
from rlvr_lab.config import ConfigError, load_run_config, settings
from rlvr_lab.envs.task_io import import_task_set, make_task_set
from rlvr_lab.envs.tasks import TaskError
from rlvr_lab.objective.config import Algorithm
from rlvr_lab.objective.entropy import ObjectiveError
from rlvr_lab.objective.gradcheck import TOLERANCE, run_gradcheck
from rlvr_lab.policy.checkpoint import CheckpointError, load_checkpoint
from rlvr_lab.services.ledger import RunLedger, init_run_ledger
from rlvr_lab.services.run_store import CONFIG_SNAPSHOT, CHECKPOINT_DIR, RunWriter, make_run_dir, read_rollouts
from rlvr_lab.tensor import TensorError
from rlvr_lab.trainer.config import TrainConfig
from rlvr_lab.trainer.optimizer import OptimizerError
from rlvr_lab.trainer.sweep import SweepAxis, ablation_sweep
from rlvr_lab.trainer.loop import train
from rlvr_lab.utils.seeding import EVAL_STREAM, derive_seed

logger = logging.getLogger("cli.lab")

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_USAGE = 2

# Failures that are the run's fault rather than the invocation's
RUNTIME_ERRORS = (TensorError, TaskError, CheckpointError, OptimizerError, ObjectiveError, ValueError, OSError)


def setup_logging(level: str) -> None:
    logging.basicConfig(
        level=getattr(logging, level.upper(), logging.INFO),
        stream=sys.stderr,
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
    )
    logging.getLogger("sqlalchemy").setLevel(logging.WARNING)


def _float_list(text: str) -> List[float]:
    try:
        values = [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}")
    if not values:
        raise argparse.ArgumentTypeError("at least one value is required")
    return values


def _run_root(args: argparse.Namespace) -> Path:
    root = Path(args.run_root or settings.run_root)
    root.mkdir(parents=True, exist_ok=True)
    return root


def _ledger(root: Path) -> RunLedger:
    return init_run_ledger(settings.resolved_ledger_url(str(root)))


def _train_into(
    run_dir: Path,
    cfg: TrainConfig,
    ledger: Optional[RunLedger],
) -> RunWriter:
    writer = RunWriter(run_dir, cfg, ledger)
    try:
        train(cfg, sink=writer, workers=settings.rollout_workers)
    except BaseException:
        writer.finalize("failed")
        raise
    writer.finalize("completed")
    return writer


def cmd_train(args: argparse.Namespace) -> int:
    cfg = load_run_config(
        args.config,
        args.set or (),
        flags={"objective.algorithm": args.algo, "seed": args.seed, "total_steps": args.steps},
    )
    root = _run_root(args)
    run_dir = make_run_dir(root, cfg.seed, cfg.objective.algorithm.value)
    _train_into(run_dir, cfg, _ledger(root))
    print(run_dir)
    return EXIT_OK


def cmd_sweep(args: argparse.Namespace) -> int:
    seeds = args.seed or [None]
    base_cfgs = [
        load_run_config(args.config, args.set or (), flags={"seed": s, "total_steps": args.steps})
        for s in seeds
    ]
    axis = SweepAxis(args.axis)
    root = _run_root(args)
    ledger = _ledger(root)
    sweep_id = f"{datetime.now().strftime('%Y%m%d-%H%M%S-%f')}-sweep-{axis.value}"
    sweep_dir = root / sweep_id
    sweep_dir.mkdir(parents=True)

    writers: List[RunWriter] = []

    def sink_for(cfg: TrainConfig, value: float) -> RunWriter:
        # the previous value has finished training by the time the next sink is requested
        if writers and writers[-1].manifest.status == "running":
            writers[-1].finalize("completed")
        run_dir = make_run_dir(sweep_dir, cfg.seed, f"{cfg.objective.algorithm.value}-{axis.value}{value:g}")
        writer = RunWriter(run_dir, cfg, ledger, sweep_id, axis.value, value)
        writers.append(writer)
        return writer

    for base in base_cfgs:
        try:
            ablation_sweep(base, axis, args.values, sink_factory=sink_for, workers=settings.rollout_workers)
        except BaseException:
            if writers and writers[-1].manifest.status == "running":
                writers[-1].finalize("failed")
            raise
        if writers and writers[-1].manifest.status == "running":
            writers[-1].finalize("completed")

    frame = ledger.step_frame([w.run_id for w in writers])
    frame.to_csv(sweep_dir / "comparison.csv", index=False)
    summary = sweep_tail_summary(frame)
    summary.to_csv(sweep_dir / "comparison_summary.csv", index=False)
    print(summary.to_string(index=False))
    print(sweep_dir)
    return EXIT_OK


def _eval_config(args: argparse.Namespace, checkpoint: Path) -> TrainConfig:
    if args.config:
        return load_run_config(args.config)
    snapshot = checkpoint.parent.parent / CONFIG_SNAPSHOT
    if checkpoint.parent.name == CHECKPOINT_DIR and snapshot.is_file():
        return load_run_config(str(snapshot))
    return load_run_config(None)


def cmd_eval(args: argparse.Namespace) -> int:
    path = Path(args.checkpoint)
    ckpt = load_checkpoint(path)
    cfg = _eval_config(args, path)
    if args.tasks:
        instances = import_task_set(args.tasks)
    else:
        n = args.instances or cfg.eval_instances
        instances = make_task_set(cfg.tasks, n, derive_seed(cfg.eval_seed, EVAL_STREAM))
    if args.instances and args.tasks:
        instances = instances[: args.instances]

    seed = cfg.eval_seed if args.seed is None else args.seed
    results = evaluate(ckpt.params, instances, args.k, cfg.eval_sampling, seed, settings.rollout_workers)
    table = eval_table(results, cfg.eval_sampling.max_new_tokens, estimator=args.estimator)

    if args.out:
        out_dir = Path(args.out)
    elif path.parent.name == CHECKPOINT_DIR:
        out_dir = path.parent.parent
    else:
        out_dir = path.parent
    out_dir.mkdir(parents=True, exist_ok=True)
    table.to_csv(out_dir / "eval.csv", index=False)
    print(table.to_string(index=False))
    return EXIT_OK


def cmd_analyze(args: argparse.Namespace) -> int:
    records = [rec for p in args.logs for rec in read_rollouts(Path(p))]
    if not records:
        raise ValueError(f"no records in {', '.join(args.logs)}")
    out_dir = Path(args.out) if args.out else Path(args.logs[0]).parent / "analysis"
    out_dir.mkdir(parents=True, exist_ok=True)

    entropy_frames, region_frames = [], []
    for step, recs in group_by_step(records).items():
        entropy_frames.append(entropy_stats(recs, args.rho).to_frame())
        regions = region_histogram(recs).to_frame()
        regions.insert(0, "step", step)
        region_frames.append(regions)
    pd.concat(entropy_frames, ignore_index=True).to_csv(out_dir / "entropy_stats.csv", index=False)
    pd.concat(region_frames, ignore_index=True).to_csv(out_dir / "regions.csv", index=False)

    freq = token_frequency_report(records, top_k_per_response=args.top_k, min_count=args.min_count)
    freq.high.to_csv(out_dir / "frequency_high.csv", index=False)
    freq.low.to_csv(out_dir / "frequency_low.csv", index=False)
    step_summary(records).to_csv(out_dir / "step_summary.csv", index=False)

    logger.info("Analyzed %d records over %d step(s) into %s", len(records), len(entropy_frames), out_dir)
    print(out_dir)
    return EXIT_OK


def cmd_gradcheck(args: argparse.Namespace) -> int:
    results = run_gradcheck(args.seed, args.scale, args.coords, corrupt_gradient=args.corrupt_gradient)
    for r in results:
        status = "ok" if r.passed else "FAIL"
        print(f"{r.objective:<7} beta={r.beta:<6g} coords={r.coords_checked:<6d} max_rel_err={r.max_rel_error:.3e}  {status}")
    if all(r.passed for r in results):
        return EXIT_OK
    print(f"gradient check failed (tolerance {TOLERANCE:g})", file=sys.stderr)
    return EXIT_FAILURE


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="rlvr-lab", description=__doc__)
    parser.add_argument("--run-root", help="directory for run outputs (default: $RLVR_RUN_ROOT)")
    parser.add_argument("--log-level", default=None, help="logging level (default: $RLVR_LOG_LEVEL)")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="train one policy")
    p.add_argument("--config", help="YAML file or preset name")
    p.add_argument("--algo", choices=[a.value for a in Algorithm])
    p.add_argument("--seed", type=int)
    p.add_argument("--steps", type=int)
    p.add_argument("--set", action="append", metavar="KEY=VALUE", help="dotted config override, repeatable")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("sweep", help="one run per value of an objective hyperparameter")
    p.add_argument("--config", help="YAML file or preset name")
    p.add_argument("--axis", required=True, choices=[a.value for a in SweepAxis])
    p.add_argument("--values", required=True, type=_float_list, help="comma-separated, e.g. 0,0.001,0.005")
    p.add_argument("--seed", type=int, nargs="+", help="one or more master seeds, shared across values")
    p.add_argument("--steps", type=int)
    p.add_argument("--set", action="append", metavar="KEY=VALUE")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("eval", help="avg@K and pass@K of a checkpoint")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--config", help="run config providing the task mix and eval sampling")
    p.add_argument("--tasks", help="JSONL task set written by export_task_set")
    p.add_argument("--instances", type=int)
    p.add_argument("-k", type=int, default=1)
    p.add_argument("--seed", type=int)
    p.add_argument("--estimator", choices=["empirical", "unbiased"], default="empirical")
    p.add_argument("--out", help="output directory for eval.csv")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("analyze", help="entropy, frequency and clip-region tables from rollout logs")
    p.add_argument("logs", nargs="+")
    p.add_argument("--out")
    p.add_argument("--rho", type=float, default=0.8)
    p.add_argument("--top-k", type=int, default=20)
    p.add_argument("--min-count", type=int, default=10)
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("gradcheck", help="finite-difference check of every objective's gradient")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--scale", choices=["tiny", "default"], default="default")
    p.add_argument("--coords", type=int, default=None,
                   help="sampled coordinates per parameter tensor (default: every coordinate at tiny scale, 8 at default scale)")
    p.add_argument("--corrupt-gradient", action="store_true", help=argparse.SUPPRESS)
    p.set_defaults(func=cmd_gradcheck)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    """Entry point."""
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code or 0)

    setup_logging(args.log_level or settings.log_level)
    try:
        return args.func(args)
    except ConfigError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except RUNTIME_ERRORS as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_FAILURE
    except KeyboardInterrupt:
        print("\nInterrupted", file=sys.stderr)
        return EXIT_FAILURE


if __name__ == "__main__":
    sys.exit(main())
