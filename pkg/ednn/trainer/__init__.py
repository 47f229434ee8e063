"""Training loop, evaluation, augmentation, checkpoint persistence and desk-scale experiments."""
from ednn.model.checkpoint import load_checkpoint, save_checkpoint
from ednn.trainer.augment import apply_augmentations, augment_downscale, augment_rotate90
from ednn.trainer.evaluate import build_report, error_histogram, evaluate, is_correct
from ednn.trainer.experiments import (
    DeskBudget,
    large_composite_check,
    negative_contribution_rate,
    run_counting_experiment,
    run_desk_suite,
)
from ednn.trainer.loop import epoch_order, initial_params, iter_batches, train

__all__ = [
    "DeskBudget",
    "apply_augmentations",
    "augment_downscale",
    "augment_rotate90",
    "build_report",
    "epoch_order",
    "error_histogram",
    "evaluate",
    "initial_params",
    "is_correct",
    "iter_batches",
    "large_composite_check",
    "load_checkpoint",
    "negative_contribution_rate",
    "run_counting_experiment",
    "run_desk_suite",
    "save_checkpoint",
    "train",
]
