#!/usr/bin/env python3
"""
EDNN Command Line
Entry point for dataset generation, training, evaluation, counting and localization
Results go to stdout as one JSON block; progress and errors go to stderr
"""
import argparse
import json
import sys
from pathlib import Path
from typing import Any, Dict, List, Optional

import structlog

from ednn.cli.commands import COMMANDS
from ednn.shared.log import configure_logging
from ednn.shared.models.config import ConfigLayers, RuntimeSettings, validated
from ednn.shared.models.dataset import DatasetVariant
from ednn.shared.models.errors import EDNNError

logger = structlog.get_logger(__name__)

EXIT_OK = 0
EXIT_UNEXPECTED = 1
EXIT_EDNN_ERROR = 2

RUNTIME_DEFAULTS = {"threads": 1, "log_level": "INFO", "log_format": "console"}
NON_SETTINGS = ("command", "config")


def _common(parser: argparse.ArgumentParser):
    parser.add_argument("--config", type=Path, help="YAML key-value config file")
    parser.add_argument("--threads", type=int, help="worker threads (env EDNN_THREADS)")
    parser.add_argument("--seed", type=int)
    parser.add_argument("--log-level", dest="log_level")
    parser.add_argument("--log-format", dest="log_format", choices=("console", "json"))


def _model_flags(parser: argparse.ArgumentParser):
    parser.add_argument("--focus", type=int, help="focus size f in pixels")
    parser.add_argument("--context", type=int, help="context width c in pixels")
    parser.add_argument("--classes", help="comma-separated class names")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ednn", description="Extensive deep neural network counting and localization")
    sub = parser.add_subparsers(dest="command", required=True)

    generate = sub.add_parser("generate", help="write a counting dataset")
    _common(generate)
    generate.add_argument("--variant", choices=[v.value for v in DatasetVariant])
    generate.add_argument("--dataset-dir", dest="dataset_dir", type=Path)
    generate.add_argument("--out", type=Path, help="alias for --dataset-dir")
    generate.add_argument("--canvas", type=int)
    generate.add_argument("--l-max", dest="l_max", type=int)
    generate.add_argument("--train-count", dest="train_count", type=int)
    generate.add_argument("--test-count", dest="test_count", type=int)
    generate.add_argument("--mnist-images", dest="mnist_images", type=Path)
    generate.add_argument("--mnist-labels", dest="mnist_labels", type=Path)

    train = sub.add_parser("train", help="train a model on a generated dataset")
    _common(train)
    _model_flags(train)
    train.add_argument("--dataset-dir", dest="dataset_dir", type=Path)
    train.add_argument("--out", type=Path, help="checkpoint path")
    train.add_argument("--checkpoint", type=Path, help="warm-start checkpoint")
    train.add_argument("--epochs-min", dest="epochs_min", type=int)
    train.add_argument("--epochs-max", dest="epochs_max", type=int)
    train.add_argument("--batch-size", dest="batch_size", type=int)
    train.add_argument("--augment", help="rotate90,downscale")
    train.add_argument("--precision", choices=("f32", "f64"))
    train.add_argument("--lr", type=float)
    train.add_argument("--loss-threshold", dest="loss_threshold", type=float)

    evaluate = sub.add_parser("eval", help="score a checkpoint on the test partition")
    _common(evaluate)
    evaluate.add_argument("--checkpoint", type=Path)
    evaluate.add_argument("--dataset-dir", dest="dataset_dir", type=Path)
    evaluate.add_argument("--examples", action="store_true", default=None,
                          help="include per-example records")

    for name, help_text in (("count", "count objects in one image"),
                            ("localize", "write density maps and overlays for one image")):
        command = sub.add_parser(name, help=help_text)
        _common(command)
        command.add_argument("image", type=Path)
        command.add_argument("--checkpoint", type=Path)
        if name == "count":
            command.add_argument("--regions", type=Path, help="JSON focus-grid rectangles")
        else:
            command.add_argument("--out", type=Path, help="output prefix")
    return parser


def resolve_settings(args: argparse.Namespace,
                     env: Optional[Dict[str, str]] = None) -> ConfigLayers:
    """defaults < config file < environment < flags"""
    layers = ConfigLayers(RUNTIME_DEFAULTS)
    if args.config is not None:
        layers.load_file(args.config)
    layers.load_environment(env)
    layers.load_flags({key: value for key, value in vars(args).items()
                       if key not in NON_SETTINGS})
    return layers


def _emit(payload: Dict[str, Any], stream) -> None:
    stream.write(json.dumps(payload, indent=2, sort_keys=True, default=str) + "\n")
    stream.flush()


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        layers = resolve_settings(args)
        runtime = validated(RuntimeSettings, layers.as_dict())
        configure_logging(runtime.log_level, runtime.log_format)
        result = COMMANDS[args.command](layers)
    except EDNNError as exc:
        logger.error("command_failed", command=args.command, code=exc.code)
        _emit({"error": exc.to_dict()}, sys.stderr)
        return EXIT_EDNN_ERROR
    except Exception as exc:  # noqa: BLE001
        logger.exception("command_crashed", command=args.command)
        _emit({"error": {"type": type(exc).__name__, "message": str(exc)}}, sys.stderr)
        return EXIT_UNEXPECTED

    _emit({"command": args.command, "result": result, "config": layers.to_dict()}, sys.stdout)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
