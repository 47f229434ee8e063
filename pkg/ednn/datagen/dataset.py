"""
Dataset Serialization
Writes generated images as PNG plus labels.json and ledger.json, and loads them back
Based on the schema {"images": [{"file", "split", "counts"}], "spec": {...}}
"""
import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple

import jsonschema
import numpy as np
import structlog

from ednn.datagen.collage import compose_collage, image_rng, sample_label
from ednn.datagen.idx import DigitPool
from ednn.datagen.imaging import read_image, write_png
from ednn.datagen.shapes import compose_shapes
from ednn.shared.models.dataset import DatasetSpec, GeneratedImage, Partition
from ednn.shared.models.errors import ConfigError, DatasetError, GenerationError, ShapeError

logger = structlog.get_logger(__name__)

LABELS_FILE = "labels.json"
LEDGER_FILE = "ledger.json"
MAX_LABEL_DRAWS = 100

LABELS_SCHEMA: Dict[str, Any] = {
    "type": "object",
    "required": ["images", "spec"],
    "properties": {
        "images": {
            "type": "array",
            "items": {
                "type": "object",
                "required": ["file", "split", "counts"],
                "properties": {
                    "file": {"type": "string"},
                    "split": {"enum": [p.value for p in Partition]},
                    "counts": {
                        "type": "object",
                        "additionalProperties": {"type": "integer", "minimum": 0},
                    },
                },
            },
        },
        "spec": {
            "type": "object",
            "required": ["classes"],
            "properties": {"classes": {"type": "array", "items": {"type": "string"}}},
        },
    },
}

ImageFactory = Callable[[np.random.Generator, Partition], Tuple[GeneratedImage, List[Dict]]]


@dataclass
class LabeledDataset:
    """One partition of an on-disk dataset held in memory"""

    files: List[str]
    images: np.ndarray
    labels: np.ndarray
    classes: Tuple[str, ...]
    spec: Dict[str, Any] = field(default_factory=dict)

    def __len__(self) -> int:
        return len(self.files)

    @property
    def channels(self) -> int:
        return int(self.images.shape[3])

    @property
    def l_max(self) -> int:
        if "l_max" in self.spec:
            return int(self.spec["l_max"])
        return int(self.labels.max()) if self.labels.size else 0


def _dump(payload: Dict[str, Any], path: Path):
    try:
        path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    except OSError as exc:
        raise DatasetError("Cannot write dataset file", {"path": str(path)}) from exc


def _write_split(spec: DatasetSpec, out_dir: Path, partition: Partition, count: int,
                 factory: ImageFactory, threads: int) -> Tuple[List[Dict], List[Dict], List[Dict]]:
    def job(index: int):
        rng = image_rng(spec.seed, partition, index)
        image, omitted = factory(rng, partition)
        name = f"{partition.value}/{index:05d}.png"
        ledger = image.ledger_counts(spec.classes)
        if ledger != {name_: image.label.counts.get(name_, 0) for name_ in spec.classes}:
            raise GenerationError("Label disagrees with the placement ledger",
                                  {"file": name, "label": image.label.to_dict(), "ledger": ledger})
        write_png(image.pixels, out_dir / name)
        entry = {"file": name, "split": partition.value, "counts": ledger}
        record = {"file": name, "placements": [p.to_dict() for p in image.placements]}
        return entry, record, omitted

    if threads > 1 and count > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(job, range(count)))
    else:
        results = [job(index) for index in range(count)]

    entries = [result[0] for result in results]
    records = [result[1] for result in results]
    omitted = [label for result in results for label in result[2]]
    logger.info("dataset_generated", split=partition.value, images=count,
                variant=spec.variant.value)
    return entries, records, omitted


def _write_dataset(spec: DatasetSpec, out_dir: Path, factory: ImageFactory,
                   threads: int) -> Dict[str, Any]:
    out_dir = Path(out_dir)
    try:
        out_dir.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise DatasetError("Cannot create dataset directory", {"path": str(out_dir)}) from exc

    entries: List[Dict] = []
    records: List[Dict] = []
    omitted: List[Dict] = []
    for partition, count in ((Partition.TRAIN, spec.train_count),
                             (Partition.TEST, spec.test_count)):
        split_entries, split_records, split_omitted = _write_split(
            spec, out_dir, partition, count, factory, threads)
        entries += split_entries
        records += split_records
        omitted += split_omitted

    labels = {"images": entries, "spec": spec.to_dict()}
    jsonschema.validate(labels, LABELS_SCHEMA)
    _dump(labels, out_dir / LABELS_FILE)
    _dump({"images": records}, out_dir / LEDGER_FILE)

    distinct = sorted({tuple(sorted(item.items())) for item in omitted})
    return {
        "dir": str(out_dir),
        "variant": spec.variant.value,
        "train": spec.train_count,
        "test": spec.test_count,
        "labels": str(out_dir / LABELS_FILE),
        "omitted_combinations": [dict(item) for item in distinct],
    }


def generate_dataset(spec: DatasetSpec, out_dir: Path, pool: Optional[DigitPool] = None,
                     threads: int = 1) -> Dict[str, Any]:
    """Write a collage dataset; SHAPES variants are routed to generate_shapes"""
    if spec.is_shapes:
        return generate_shapes(spec, out_dir, threads)
    if pool is None:
        raise ConfigError("MNIST variants need a digit pool (--mnist-images/--mnist-labels)",
                          {"variant": spec.variant.value})

    def factory(rng: np.random.Generator, partition: Partition):
        label = sample_label(spec, rng)
        return compose_collage(spec, label, pool, rng, partition), []

    return _write_dataset(spec, out_dir, factory, threads)


def generate_shapes(spec: DatasetSpec, out_dir: Path, threads: int = 1) -> Dict[str, Any]:
    """Write a SHAPES dataset; label draws that cannot be packed are redrawn and reported"""
    if not spec.is_shapes:
        raise ConfigError("Not a SHAPES variant", {"variant": spec.variant.value})

    def factory(rng: np.random.Generator, partition: Partition):
        omitted: List[Dict] = []
        for _ in range(MAX_LABEL_DRAWS):
            label = sample_label(spec, rng)
            image = compose_shapes(spec, label, rng, partition)
            if image is not None:
                return image, omitted
            omitted.append(label.to_dict())
        raise GenerationError("No packable label found", {"draws": MAX_LABEL_DRAWS})

    return _write_dataset(spec, out_dir, factory, threads)


def read_labels(dataset_dir: Path) -> Dict[str, Any]:
    """Parse and schema-check labels.json"""
    path = Path(dataset_dir) / LABELS_FILE
    try:
        payload = json.loads(path.read_text(encoding="utf-8"))
    except OSError as exc:
        raise DatasetError("Cannot read dataset labels", {"path": str(path)}) from exc
    except json.JSONDecodeError as exc:
        raise DatasetError("Dataset labels are not valid JSON",
                           {"path": str(path), "line": exc.lineno}) from exc
    try:
        jsonschema.validate(payload, LABELS_SCHEMA)
    except jsonschema.ValidationError as exc:
        raise DatasetError("Dataset labels do not match the schema",
                           {"path": str(path), "detail": exc.message}) from exc
    return payload


def load_dataset(dataset_dir: Path, partition: Partition,
                 channels: Optional[int] = None,
                 classes: Optional[Sequence[str]] = None) -> LabeledDataset:
    """Load one partition; every image must share extents and channel count"""
    dataset_dir = Path(dataset_dir)
    payload = read_labels(dataset_dir)
    spec = payload["spec"]
    names = tuple(classes) if classes else tuple(spec["classes"])
    if classes and tuple(spec["classes"]) != names:
        raise DatasetError("Dataset classes differ from the model's classes",
                           {"dataset": spec["classes"], "model": list(names)})

    entries = [entry for entry in payload["images"]
               if entry["split"] == Partition(partition).value]
    files: List[str] = []
    pixels: List[np.ndarray] = []
    labels = np.zeros((len(entries), len(names)), dtype=np.float64)
    for row, entry in enumerate(entries):
        image = read_image(dataset_dir / entry["file"], channels)
        if pixels and image.shape != pixels[0].shape:
            raise ShapeError("Dataset images differ in size",
                             {"file": entry["file"], "shape": image.shape,
                              "expected": pixels[0].shape})
        files.append(entry["file"])
        pixels.append(image)
        labels[row] = [entry["counts"].get(name, 0) for name in names]

    depth = channels or 1
    images = np.stack(pixels) if pixels else np.zeros((0, 0, 0, depth), dtype=np.uint8)
    return LabeledDataset(files=files, images=images, labels=labels, classes=names, spec=spec)
