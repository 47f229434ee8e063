"""
Evaluation
Per-class rounding accuracy, error histograms and error summaries over a dataset partition
"""
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Union

import numpy as np
import structlog

from ednn.datagen.dataset import LabeledDataset, load_dataset
from ednn.model.checkpoint import Checkpoint, load_checkpoint
from ednn.model.network import predict
from ednn.shared.models.dataset import Partition
from ednn.shared.models.errors import ConfigError
from ednn.shared.models.training import ErrorHistogram, EvalReport, ExampleRecord

logger = structlog.get_logger(__name__)

BIN_WIDTH = 0.1
CORRECT_RADIUS = 0.5


def is_correct(predicted: np.ndarray, label: np.ndarray) -> np.ndarray:
    """Rounds to the label: |pred - label| < 0.5, so an error of exactly 0.5 is wrong"""
    return np.abs(np.asarray(predicted) - np.asarray(label)) < CORRECT_RADIUS


def error_histogram(errors: np.ndarray, l_max: int) -> ErrorHistogram:
    """
    Bins of width 0.1 over [-L_max, L_max], each closed on its edge nearer zero
    The ten bins around zero then hold exactly the errors that round correctly;
    errors beyond the range land in the end bins
    """
    span = max(int(l_max), 1)
    half = int(round(span / BIN_WIDTH))
    errors = np.asarray(errors, dtype=np.float64).reshape(-1)
    ring_edges = np.round(np.arange(half + 1) * BIN_WIDTH, 10)
    ring = np.searchsorted(ring_edges, np.abs(errors), side="right") - 1
    ring = np.minimum(ring, half - 1)
    index = np.where(errors < 0, half - 1 - ring, half + ring)
    counts = np.bincount(index, minlength=2 * half)
    edges = np.round(np.arange(-half, half + 1) * BIN_WIDTH, 10)
    return ErrorHistogram(edges=[float(e) for e in edges],
                          counts=[int(c) for c in counts])


def build_report(classes: Sequence[str], predicted: np.ndarray, labels: np.ndarray,
                 l_max: int, files: Optional[Sequence[str]] = None) -> EvalReport:
    """Score predictions against labels; each class is scored on its own column"""
    predicted = np.asarray(predicted, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.float64)
    if predicted.shape != labels.shape or predicted.shape[1:] != (len(classes),):
        raise ConfigError("Predictions and labels must both be [examples, classes]",
                          {"predicted": predicted.shape, "labels": labels.shape,
                           "classes": len(classes)})
    size = predicted.shape[0]
    errors = predicted - labels
    correct = is_correct(predicted, labels)

    accuracy: Dict[str, float] = {}
    histograms: Dict[str, ErrorHistogram] = {}
    summary: Dict[str, Dict[str, float]] = {}
    for column, name in enumerate(classes):
        column_errors = errors[:, column]
        accuracy[name] = float(correct[:, column].mean()) if size else 0.0
        histograms[name] = error_histogram(column_errors, l_max)
        if size:
            summary[name] = {
                "min": float(column_errors.min()),
                "median": float(np.median(column_errors)),
                "max": float(column_errors.max()),
                "mae": float(np.abs(column_errors).mean()),
            }

    files = list(files) if files is not None else [str(i) for i in range(size)]
    records = [
        ExampleRecord(file=files[row],
                      predicted={name: float(predicted[row, c]) for c, name in enumerate(classes)},
                      label={name: int(round(labels[row, c])) for c, name in enumerate(classes)})
        for row in range(size)
    ]
    loss = float(np.mean(errors * errors)) if errors.size else 0.0
    return EvalReport(classes=list(classes), accuracy=accuracy, histograms=histograms,
                      loss=loss, error_summary=summary, records=records)


def evaluate(checkpoint: Union[Checkpoint, Path], dataset_dir: Path,
             partition: Partition = Partition.TEST, threads: int = 1,
             chunk_size: int = 32, dataset: Optional[LabeledDataset] = None) -> EvalReport:
    """Predict every image of a partition and score the rounded counts"""
    if not isinstance(checkpoint, Checkpoint):
        checkpoint = load_checkpoint(checkpoint)
    config = checkpoint.config
    if dataset is None:
        dataset = load_dataset(dataset_dir, partition, channels=config.channels,
                               classes=config.class_names or None)
    if len(dataset.classes) != config.classes:
        raise ConfigError("Checkpoint class count differs from the dataset",
                          {"model": config.classes, "dataset": len(dataset.classes)})

    if len(dataset):
        predicted, _ = predict(list(dataset.images), checkpoint.params, config,
                               chunk_size=chunk_size, threads=threads)
    else:
        predicted = np.zeros((0, config.classes))
    report = build_report(config.names(), predicted, dataset.labels, dataset.l_max,
                          dataset.files)
    logger.info("evaluation_completed", images=report.size, accuracy=report.accuracy,
                loss=report.loss)
    return report
