"""
Training Loop
Seeded mini-batch Adam training with loss-threshold stopping and periodic checkpoints
"""
import time
from collections import deque
from concurrent.futures import Future, ThreadPoolExecutor
from pathlib import Path
from typing import Deque, Iterator, List, Optional, Tuple

import numpy as np
import structlog

from ednn.datagen.dataset import LabeledDataset, load_dataset
from ednn.model.checkpoint import load_checkpoint, save_checkpoint
from ednn.model.network import build, prepare_batch, training_step
from ednn.shared.models.dataset import Partition
from ednn.shared.models.errors import ConfigError, DatasetError, DivergenceError
from ednn.shared.models.training import (
    EpochRecord,
    StopReason,
    TrainConfig,
    TrainingResult,
)
from ednn.tensor_math import Adam, ParamSet
from ednn.trainer.augment import apply_augmentations

logger = structlog.get_logger(__name__)

Batch = Tuple[np.ndarray, np.ndarray]


def epoch_order(seed: int, epoch: int, size: int) -> np.ndarray:
    """Seeded permutation of example indices for one epoch"""
    return np.random.default_rng([seed, epoch]).permutation(size)


def assemble_batch(dataset: LabeledDataset, indices: np.ndarray, config: TrainConfig,
                   epoch: int) -> Batch:
    """Stack (and augment) the selected examples; augmentation streams are keyed by (seed, epoch, index)"""
    images = []
    for index in indices:
        image = dataset.images[index]
        if config.augment:
            rng = np.random.default_rng([config.seed, epoch, int(index)])
            image = apply_augmentations(image, config.augment, rng, config.downscale_range)
        images.append(image)
    return prepare_batch(images, config.model), dataset.labels[indices]


def iter_batches(dataset: LabeledDataset, config: TrainConfig, epoch: int) -> Iterator[Batch]:
    """Batches of one epoch; with threads > 1 up to `threads` batches are built ahead"""
    order = epoch_order(config.seed, epoch, len(dataset))
    chunks = [order[start:start + config.batch_size]
              for start in range(0, len(order), config.batch_size)]
    if config.threads <= 1:
        for chunk in chunks:
            yield assemble_batch(dataset, chunk, config, epoch)
        return

    with ThreadPoolExecutor(max_workers=config.threads) as pool:
        pending: Deque[Future] = deque()
        upcoming = iter(chunks)
        for chunk in upcoming:
            pending.append(pool.submit(assemble_batch, dataset, chunk, config, epoch))
            if len(pending) >= config.threads:
                break
        while pending:
            batch = pending.popleft().result()
            following = next(upcoming, None)
            if following is not None:
                pending.append(pool.submit(assemble_batch, dataset, following, config, epoch))
            yield batch


def initial_params(config: TrainConfig) -> ParamSet:
    """Fresh weights, or a warm start from init_checkpoint"""
    if config.init_checkpoint is None:
        return build(config.model, config.seed, config.precision)
    checkpoint = load_checkpoint(config.init_checkpoint, expected_config=config.model)
    logger.info("warm_start", checkpoint=str(config.init_checkpoint), epoch=checkpoint.epoch)
    return checkpoint.params.astype(config.precision.dtype)


def _check_dataset(dataset: LabeledDataset, config: TrainConfig):
    if len(dataset) == 0:
        raise DatasetError("Training partition is empty", {"dir": str(config.dataset_dir)})
    if len(dataset.classes) != config.model.classes:
        raise ConfigError("Model class count differs from the dataset",
                          {"model": config.model.classes, "dataset": len(dataset.classes)})


def train(config: TrainConfig, dataset: Optional[LabeledDataset] = None) -> TrainingResult:
    """Train until the epoch mean loss drops below the threshold or max_epochs is reached"""
    if dataset is None:
        dataset = load_dataset(config.dataset_dir, Partition.TRAIN,
                               channels=config.model.channels,
                               classes=config.model.class_names or None)
    _check_dataset(dataset, config)
    if not config.model.class_names:
        named = config.model.model_copy(update={"class_names": tuple(dataset.classes)})
        config = config.model_copy(update={"model": named})

    params = initial_params(config)
    optimizer = Adam(config.learning_rate, config.beta1, config.beta2, config.epsilon)
    records: List[EpochRecord] = []
    last_good: Optional[Path] = None
    stop_reason = StopReason.MAX_EPOCHS

    def metadata(epoch: int, loss: float, reason: Optional[StopReason] = None):
        data = {"epoch": epoch, "seed": config.seed, "loss": loss,
                "dataset": str(config.dataset_dir), "precision": config.precision.value}
        if reason is not None:
            data["stop_reason"] = reason.value
        return data

    for epoch in range(1, config.max_epochs + 1):
        started = time.perf_counter()
        total = 0.0
        try:
            for images, labels in iter_batches(dataset, config, epoch):
                step = training_step(images, labels, params, optimizer, config.model,
                                     measure_after=False)
                total += step.pre_step_loss * len(labels)
        except DivergenceError as exc:
            logger.error("training_diverged", epoch=epoch,
                         last_checkpoint=str(last_good) if last_good else None)
            raise DivergenceError("Training diverged",
                                  {**exc.context, "epoch": epoch,
                                   "last_checkpoint": str(last_good) if last_good else None}
                                  ) from exc

        loss = total / len(dataset)
        record = EpochRecord(epoch=epoch, loss=loss, seconds=time.perf_counter() - started)
        records.append(record)
        logger.info("epoch_completed", **record.to_dict())

        if not np.isfinite(loss):
            raise DivergenceError("Epoch loss is not finite",
                                  {"epoch": epoch,
                                   "last_checkpoint": str(last_good) if last_good else None})
        if epoch >= config.min_epochs and loss < config.loss_threshold:
            stop_reason = StopReason.LOSS_THRESHOLD
            break
        if epoch % config.checkpoint_every == 0 and epoch < config.max_epochs:
            last_good = save_checkpoint(params, config.model, config.out, metadata(epoch, loss))

    final = records[-1]
    path = save_checkpoint(params, config.model, config.out,
                           metadata(final.epoch, final.loss, stop_reason))
    logger.info("training_stopped", reason=stop_reason.value, epochs=final.epoch,
                loss=final.loss)
    return TrainingResult(checkpoint=path, epochs=records, stop_reason=stop_reason)
