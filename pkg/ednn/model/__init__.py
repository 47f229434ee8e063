"""Extensive network: construction, prediction, training step and checkpoints."""
from ednn.model.checkpoint import Checkpoint, load_checkpoint, save_checkpoint
from ednn.model.network import (
    EDNNModel,
    StepResult,
    build,
    forward_counts,
    forward_tiles,
    normalize_pixels,
    parameter_shapes,
    predict,
    prepare_batch,
    training_step,
)

__all__ = [
    "Checkpoint",
    "EDNNModel",
    "StepResult",
    "build",
    "forward_counts",
    "forward_tiles",
    "load_checkpoint",
    "normalize_pixels",
    "parameter_shapes",
    "predict",
    "prepare_batch",
    "save_checkpoint",
    "training_step",
]
