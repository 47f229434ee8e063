#!/usr/bin/env python3
"""
Desk-Scale Reproduction Runner
Generates MNIST collage datasets, trains and evaluates EDNN models at reduced scale
Prints one JSON summary to stdout; progress is logged to stderr
"""
import argparse
import json
import sys
from pathlib import Path
from typing import List, Optional

import structlog

from ednn.shared.log import configure_logging
from ednn.shared.models.errors import EDNNError
from ednn.trainer.experiments import DeskBudget, run_desk_suite

logger = structlog.get_logger(__name__)

EXPERIMENTS = ("mnist1", "mnist2", "occlusion")


def build_parser() -> argparse.ArgumentParser:
    defaults = DeskBudget()
    parser = argparse.ArgumentParser(description="Run the desk-scale counting experiments")
    parser.add_argument("--mnist-dir", type=Path, required=True,
                        help="directory holding train-images-idx3-ubyte and train-labels-idx1-ubyte")
    parser.add_argument("--work-dir", type=Path, default=Path("desk-runs"))
    parser.add_argument("--experiments", default=",".join(EXPERIMENTS),
                        help="comma-separated subset of " + ", ".join(EXPERIMENTS))
    parser.add_argument("--train-count", type=int, default=defaults.train_count)
    parser.add_argument("--test-count", type=int, default=defaults.test_count)
    parser.add_argument("--epochs-max", type=int, default=defaults.max_epochs)
    parser.add_argument("--seed", type=int, default=defaults.seed)
    parser.add_argument("--threads", type=int, default=defaults.threads)
    parser.add_argument("--log-format", choices=("console", "json"), default="console")
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    configure_logging("INFO", args.log_format)
    wanted = [name.strip() for name in args.experiments.split(",") if name.strip()]
    unknown = sorted(set(wanted) - set(EXPERIMENTS))
    if unknown:
        logger.error("unknown_experiments", names=unknown)
        return 2

    budget = DeskBudget(train_count=args.train_count, test_count=args.test_count,
                        max_epochs=args.epochs_max, seed=args.seed, threads=args.threads)
    try:
        summary = run_desk_suite(args.mnist_dir, args.work_dir, budget, wanted)
    except EDNNError as exc:
        logger.error("reproduction_failed", code=exc.code)
        sys.stderr.write(json.dumps({"error": exc.to_dict()}, default=str) + "\n")
        return 2

    sys.stdout.write(json.dumps(summary, indent=2, sort_keys=True, default=str) + "\n")
    return 0


if __name__ == "__main__":
    sys.exit(main())
