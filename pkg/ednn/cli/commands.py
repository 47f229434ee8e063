"""
CLI Commands
generate, train, eval, count and localize, each returning a JSON-ready result block
Settings arrive as a ConfigLayers instance already merged from defaults, file, env and flags
"""
import json
from pathlib import Path
from typing import Any, Dict, List, Sequence

import jsonschema
import numpy as np
import structlog

from ednn.datagen import generate_dataset, load_idx, read_image, read_labels
from ednn.model import load_checkpoint, predict
from ednn.shared.models.config import ConfigLayers, validated
from ednn.shared.models.dataset import DatasetSpec
from ednn.shared.models.errors import ConfigError, RegionError
from ednn.shared.models.grid import GridRect
from ednn.shared.models.network import EDNNConfig
from ednn.shared.models.training import TrainConfig
from ednn.tiler import assemble_density_map, region_report
from ednn.tiler.render import write_density_outputs
from ednn.trainer import evaluate, train

logger = structlog.get_logger(__name__)

MODEL_KEYS = ("focus", "context", "kernels", "kernel_size", "stride", "dense_width")
DATASET_KEYS = ("variant", "l_max", "canvas", "train_count", "test_count", "seed",
                "glyph_size", "max_attempts", "max_restarts")
TRAIN_KEYS = {
    "dataset_dir": "dataset_dir",
    "out": "out",
    "lr": "learning_rate",
    "learning_rate": "learning_rate",
    "loss_threshold": "loss_threshold",
    "epochs_min": "min_epochs",
    "epochs_max": "max_epochs",
    "batch_size": "batch_size",
    "seed": "seed",
    "augment": "augment",
    "downscale_range": "downscale_range",
    "precision": "precision",
    "threads": "threads",
    "checkpoint_every": "checkpoint_every",
    "checkpoint": "init_checkpoint",
}

REGIONS_SCHEMA: Dict[str, Any] = {
    "type": "object",
    "required": ["regions"],
    "properties": {
        "regions": {
            "type": "array",
            "items": {
                "type": "object",
                "required": ["row", "col", "height", "width"],
                "properties": {
                    "name": {"type": "string"},
                    "row": {"type": "integer", "minimum": 0},
                    "col": {"type": "integer", "minimum": 0},
                    "height": {"type": "integer", "minimum": 0},
                    "width": {"type": "integer", "minimum": 0},
                    "expected": {"type": "array", "items": {"type": "integer", "minimum": 0}},
                },
            },
        },
    },
}


def as_list(value: Any) -> List[str]:
    """Comma-separated text or a YAML list, as a list of stripped strings"""
    if value is None:
        return []
    if isinstance(value, str):
        return [item.strip() for item in value.split(",") if item.strip()]
    return [str(item) for item in value]


def _pick(layers: ConfigLayers, keys: Sequence[str]) -> Dict[str, Any]:
    return {key: layers.get(key) for key in keys if layers.get(key) is not None}


def _required(layers: ConfigLayers, key: str) -> Any:
    value = layers.get(key)
    if value is None:
        raise ConfigError(f"Missing required setting '{key}'",
                          {"flag": "--" + key.replace("_", "-")})
    return value


def model_config(layers: ConfigLayers, dataset_classes: Sequence[str],
                 channels: int) -> EDNNConfig:
    """EDNNConfig from resolved settings; classes default to the dataset's"""
    names = as_list(layers.get("classes")) or list(dataset_classes)
    if dataset_classes and names != list(dataset_classes):
        raise ConfigError("Classes differ from the dataset's classes",
                          {"classes": names, "dataset": list(dataset_classes)})
    data = _pick(layers, MODEL_KEYS)
    data.update(channels=channels, classes=len(names), class_names=tuple(names))
    return validated(EDNNConfig, data)


def dataset_spec(layers: ConfigLayers) -> DatasetSpec:
    return validated(DatasetSpec, _pick(layers, DATASET_KEYS))


def train_config(layers: ConfigLayers) -> TrainConfig:
    dataset_dir = Path(_required(layers, "dataset_dir"))
    spec = read_labels(dataset_dir)["spec"]
    model = model_config(layers, spec["classes"], int(spec.get("channels", 1)))
    data: Dict[str, Any] = {"model": model}
    for key, field_name in TRAIN_KEYS.items():
        if layers.get(key) is not None:
            data[field_name] = layers.get(key)
    if "augment" in data:
        data["augment"] = tuple(as_list(data["augment"]))
    if "downscale_range" in data:
        data["downscale_range"] = tuple(float(v) for v in as_list(data["downscale_range"]))
    return validated(TrainConfig, data)


def load_regions(path: Path) -> List[GridRect]:
    """Regions file: {"regions": [{"row", "col", "height", "width", "name"?, "expected"?}]}"""
    try:
        payload = json.loads(Path(path).read_text(encoding="utf-8"))
    except OSError as exc:
        raise RegionError("Cannot read regions file", {"path": str(path)}) from exc
    except json.JSONDecodeError as exc:
        raise RegionError("Regions file is not valid JSON",
                          {"path": str(path), "line": exc.lineno}) from exc
    if isinstance(payload, list):
        payload = {"regions": payload}
    try:
        jsonschema.validate(payload, REGIONS_SCHEMA)
    except jsonschema.ValidationError as exc:
        raise RegionError("Regions file does not match the schema",
                          {"path": str(path), "detail": exc.message}) from exc
    return [GridRect.from_dict(item) for item in payload["regions"]]


def run_generate(layers: ConfigLayers) -> Dict[str, Any]:
    spec = dataset_spec(layers)
    out_dir = Path(layers.get("dataset_dir") or _required(layers, "out"))
    pool = None
    if not spec.is_shapes:
        digits = sorted(int(name) for name in spec.classes)
        pool_settings = _pick(layers, ("per_digit", "test_per_digit"))
        pool = load_idx(Path(_required(layers, "mnist_images")),
                        Path(_required(layers, "mnist_labels")),
                        digits=digits, **{k: int(v) for k, v in pool_settings.items()})
    summary = generate_dataset(spec, out_dir, pool, threads=int(layers.get("threads", 1)))
    if pool is not None:
        summary["pool"] = pool.summary()
    return summary


def run_train(layers: ConfigLayers) -> Dict[str, Any]:
    config = train_config(layers)
    logger.info("training_started", dataset=str(config.dataset_dir),
                layers=config.model.n_conv_layers, tile=config.model.tile_size)
    return train(config).to_dict()


def run_eval(layers: ConfigLayers) -> Dict[str, Any]:
    checkpoint = load_checkpoint(Path(_required(layers, "checkpoint")))
    report = evaluate(checkpoint, Path(_required(layers, "dataset_dir")),
                      threads=int(layers.get("threads", 1)))
    return report.to_dict(include_examples=bool(layers.get("examples")))


def _predict_image(layers: ConfigLayers):
    checkpoint = load_checkpoint(Path(_required(layers, "checkpoint")))
    image_path = Path(_required(layers, "image"))
    image = read_image(image_path, checkpoint.config.channels)
    counts, contribs = predict([image], checkpoint.params, checkpoint.config,
                               threads=int(layers.get("threads", 1)))
    density = assemble_density_map(contribs)[0]
    return checkpoint, image, counts[0], contribs, density


def _count_block(names: Sequence[str], counts: np.ndarray) -> Dict[str, Any]:
    return {
        "counts": {name: float(value) for name, value in zip(names, counts)},
        "rounded": {name: int(np.rint(value)) for name, value in zip(names, counts)},
    }


def run_count(layers: ConfigLayers) -> Dict[str, Any]:
    checkpoint, image, counts, contribs, density = _predict_image(layers)
    names = checkpoint.config.names()
    result = {"image": str(layers.get("image")), "height": int(image.shape[0]),
              "width": int(image.shape[1]), "tiles": contribs.grid.n_tiles,
              "grid": contribs.grid.to_dict(), **_count_block(names, counts)}
    if layers.get("regions") is not None:
        result["regions"] = region_report(density, load_regions(Path(layers.get("regions"))))
    return result


def run_localize(layers: ConfigLayers) -> Dict[str, Any]:
    checkpoint, image, counts, _, density = _predict_image(layers)
    prefix = Path(_required(layers, "out"))
    outputs = write_density_outputs(image, density, prefix)
    return {"image": str(layers.get("image")), "outputs": outputs,
            "grid": {"rows": density.rows, "cols": density.cols, "focus": density.focus},
            **_count_block(checkpoint.config.names(), counts)}


COMMANDS = {
    "generate": run_generate,
    "train": run_train,
    "eval": run_eval,
    "count": run_count,
    "localize": run_localize,
}

