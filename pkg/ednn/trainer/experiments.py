"""
Desk-Scale Experiments
Reduced-budget counting runs on real MNIST glyphs: accuracy, negative contributions,
occlusion ordering and generalization to larger composites
"""
import json
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional

import numpy as np
import structlog

from ednn.datagen.dataset import LEDGER_FILE, generate_dataset, load_dataset
from ednn.datagen.idx import DigitPool, load_idx
from ednn.model.checkpoint import Checkpoint, load_checkpoint
from ednn.model.network import predict
from ednn.shared.models.dataset import DatasetSpec, DatasetVariant, Partition
from ednn.shared.models.errors import DatasetError
from ednn.shared.models.network import EDNNConfig
from ednn.shared.models.training import TrainConfig
from ednn.tiler.tiling import assemble_density_map
from ednn.trainer.evaluate import evaluate, is_correct
from ednn.trainer.loop import train

logger = structlog.get_logger(__name__)

MNIST_IMAGES = "train-images-idx3-ubyte"
MNIST_LABELS = "train-labels-idx1-ubyte"


@dataclass(frozen=True)
class DeskBudget:
    """
    Reduced data and compute budget for one experiment
    64px canvases, 2000/200 images and a 200-epoch cap that stops at the first epoch
    under the threshold; the step size is 1e-3 against the 1e-4 TrainConfig default
    """

    canvas: int = 64
    l_max: int = 5
    train_count: int = 2000
    test_count: int = 200
    glyph_size: int = 12
    focus: int = 8
    context: int = 8
    loss_threshold: float = 1e-2
    min_epochs: int = 1
    max_epochs: int = 200
    learning_rate: float = 1e-3
    batch_size: int = 32
    seed: int = 0
    threads: int = 1


@dataclass
class ExperimentResult:
    variant: str
    dataset_dir: Path
    checkpoint: Path
    accuracy: Dict[str, float]
    loss: float
    epochs: int
    stop_reason: str
    seconds: float
    extras: Dict[str, Any] = field(default_factory=dict)

    @property
    def mean_accuracy(self) -> float:
        return float(np.mean(list(self.accuracy.values())))

    def to_dict(self) -> Dict[str, Any]:
        return {"variant": self.variant, "dataset_dir": str(self.dataset_dir),
                "checkpoint": str(self.checkpoint), "accuracy": self.accuracy,
                "test_loss": self.loss, "epochs": self.epochs,
                "stop_reason": self.stop_reason, "seconds": round(self.seconds, 1),
                **self.extras}


def load_mnist_pool(mnist_dir: Path) -> DigitPool:
    """Glyph pool from the standard MNIST training files inside mnist_dir"""
    mnist_dir = Path(mnist_dir)
    return load_idx(mnist_dir / MNIST_IMAGES, mnist_dir / MNIST_LABELS)


def run_counting_experiment(variant: DatasetVariant, pool: DigitPool, work_dir: Path,
                            budget: DeskBudget = DeskBudget()) -> ExperimentResult:
    """Generate, train and evaluate one variant under the budget"""
    started = time.perf_counter()
    spec = DatasetSpec(variant=variant, l_max=budget.l_max, canvas=budget.canvas,
                       glyph_size=budget.glyph_size, train_count=budget.train_count,
                       test_count=budget.test_count, seed=budget.seed)
    dataset_dir = Path(work_dir) / variant.value
    generate_dataset(spec, dataset_dir, pool, threads=budget.threads)

    model = EDNNConfig(focus=budget.focus, context=budget.context, channels=spec.channels,
                       classes=len(spec.classes), class_names=spec.classes)
    config = TrainConfig(dataset_dir=dataset_dir, out=dataset_dir / "model.ckpt", model=model,
                         learning_rate=budget.learning_rate,
                         loss_threshold=budget.loss_threshold,
                         min_epochs=budget.min_epochs, max_epochs=budget.max_epochs,
                         batch_size=budget.batch_size,
                         seed=budget.seed, threads=budget.threads)
    outcome = train(config)
    report = evaluate(outcome.checkpoint, dataset_dir, threads=budget.threads)
    result = ExperimentResult(variant=variant.value, dataset_dir=dataset_dir,
                              checkpoint=outcome.checkpoint, accuracy=report.accuracy,
                              loss=report.loss, epochs=len(outcome.epochs),
                              stop_reason=outcome.stop_reason.value,
                              seconds=time.perf_counter() - started)
    logger.info("experiment_completed", variant=variant.value, accuracy=report.accuracy,
                epochs=result.epochs)
    return result


def _ledger(dataset_dir: Path) -> Dict[str, List[Dict[str, Any]]]:
    path = Path(dataset_dir) / LEDGER_FILE
    try:
        records = json.loads(path.read_text(encoding="utf-8"))["images"]
    except (OSError, ValueError, KeyError) as exc:
        raise DatasetError("Cannot read generator ledger", {"path": str(path)}) from exc
    return {record["file"]: record["placements"] for record in records}


def negative_contribution_rate(checkpoint: Checkpoint, dataset_dir: Path,
                               threads: int = 1) -> Dict[str, Any]:
    """Share of single-digit test images whose off-class map dips below zero on the digit.

    Only two-class checkpoints qualify; the digit's box is taken from the ledger and
    converted to focus-grid cells.
    """
    config = checkpoint.config
    dataset = load_dataset(dataset_dir, Partition.TEST, channels=config.channels,
                           classes=config.class_names or None)
    ledger = _ledger(dataset_dir)
    singles = [row for row in range(len(dataset)) if dataset.labels[row].sum() == 1]
    if config.classes != 2 or not singles:
        return {"single_digit_images": len(singles), "negative_rate": None}

    _, contribs = predict([dataset.images[row] for row in singles], checkpoint.params, config,
                          threads=threads)
    focus = config.focus
    hits = 0
    for density, row in zip(assemble_density_map(contribs), singles):
        (placement,) = ledger[dataset.files[row]]
        own = dataset.classes.index(placement["class_name"])
        top, left = placement["top"], placement["left"]
        bottom = top + placement["height"]
        right = left + placement["width"]
        cells = density.values[top // focus:(bottom - 1) // focus + 1,
                               left // focus:(right - 1) // focus + 1, 1 - own]
        hits += int(np.any(cells < 0))
    return {"single_digit_images": len(singles), "negative_rate": hits / len(singles)}


def large_composite_check(checkpoint: Checkpoint, dataset_dir: Path, side: int = 256,
                          start: int = 0) -> Dict[str, Any]:
    """Four held-out canvases centred in the quadrants of a side x side image"""
    config = checkpoint.config
    dataset = load_dataset(dataset_dir, Partition.TEST, channels=config.channels,
                           classes=config.class_names or None)
    if len(dataset) < start + 4:
        raise DatasetError("Need four test images for the composite",
                           {"available": len(dataset), "start": start})
    height, width = dataset.images.shape[1:3]
    quadrant = side // 2
    if height > quadrant or width > quadrant:
        raise DatasetError("Canvases do not fit the composite quadrants",
                           {"canvas": [height, width], "side": side})

    composite = np.zeros((side, side, config.channels), dtype=np.uint8)
    for offset in range(4):
        q_row, q_col = divmod(offset, 2)
        top = q_row * quadrant + (quadrant - height) // 2
        left = q_col * quadrant + (quadrant - width) // 2
        composite[top:top + height, left:left + width] = dataset.images[start + offset]
    expected = dataset.labels[start:start + 4].sum(axis=0)

    counts, _ = predict([composite], checkpoint.params, config)
    names = config.names()
    within = is_correct(counts[0], expected)
    return {"side": side,
            "predicted": {name: float(value) for name, value in zip(names, counts[0])},
            "expected": {name: int(value) for name, value in zip(names, expected)},
            "within_half": {name: bool(value) for name, value in zip(names, within)}}


def run_desk_suite(mnist_dir: Path, work_dir: Path, budget: DeskBudget = DeskBudget(),
                   experiments: Optional[List[str]] = None) -> Dict[str, Any]:
    """MNIST-1 and MNIST-2 accuracy, negative contributions, occlusion ordering, composites"""
    wanted = experiments or ["mnist1", "mnist2", "occlusion"]
    pool = load_mnist_pool(mnist_dir)
    summary: Dict[str, Any] = {"budget": asdict(budget)}

    if "mnist1" in wanted:
        result = run_counting_experiment(DatasetVariant.MNIST_1, pool, work_dir, budget)
        checkpoint = load_checkpoint(result.checkpoint)
        result.extras["composite"] = large_composite_check(checkpoint, result.dataset_dir)
        summary["mnist1"] = result.to_dict()

    mnist2: Optional[ExperimentResult] = None
    if "mnist2" in wanted or "occlusion" in wanted:
        mnist2 = run_counting_experiment(DatasetVariant.MNIST_2, pool, work_dir, budget)
        checkpoint = load_checkpoint(mnist2.checkpoint)
        mnist2.extras["negative_contributions"] = negative_contribution_rate(
            checkpoint, mnist2.dataset_dir, budget.threads)
        summary["mnist2"] = mnist2.to_dict()

    if "occlusion" in wanted and mnist2 is not None:
        occluded = run_counting_experiment(DatasetVariant.MNIST_2_OCC, pool, work_dir, budget)
        summary["mnist2_occ"] = occluded.to_dict()
        summary["occlusion_lowers_accuracy"] = occluded.mean_accuracy < mnist2.mean_accuracy
    return summary
