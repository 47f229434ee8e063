"""
Checkpoint Persistence
Text manifest (key=value) followed by named, shaped little-endian float32 tensors

Layout:
    EDNN-CHECKPOINT <version>
    key=value            (sorted; model.* keys hold the EDNNConfig)
    tensors=<count>
    <blank line>
    tensor <name> <d0>x<d1>x...   then prod(shape) * 4 raw bytes, repeated
"""
import os
from collections import OrderedDict
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, Mapping, Optional, Tuple

import numpy as np
import structlog

from ednn.model.network import parameter_shapes
from ednn.shared.models.errors import (
    CheckpointShapeError,
    CheckpointVersionError,
    ConfigError,
    CorruptCheckpointError,
)
from ednn.shared.models.network import EDNNConfig
from ednn.tensor_math import ParamSet

logger = structlog.get_logger(__name__)

MAGIC = "EDNN-CHECKPOINT"
FORMAT_VERSION = 1
STORAGE_DTYPE = np.dtype("<f4")
MODEL_PREFIX = "model."


@dataclass
class Checkpoint:
    """A loaded checkpoint: configuration, float32 parameters and run metadata"""

    config: EDNNConfig
    params: ParamSet
    metadata: Dict[str, str] = field(default_factory=dict)

    @property
    def epoch(self) -> Optional[int]:
        value = self.metadata.get("epoch")
        return int(value) if value is not None else None

    @property
    def seed(self) -> Optional[int]:
        value = self.metadata.get("seed")
        return int(value) if value is not None else None


def _format_value(value: Any) -> str:
    if isinstance(value, float):
        return repr(value)
    text = str(value)
    if "\n" in text:
        raise ConfigError("Checkpoint metadata values must be single-line",
                          {"value": text[:40]})
    return text


def save_checkpoint(params: ParamSet, config: EDNNConfig, path: Path,
                    metadata: Optional[Mapping[str, Any]] = None) -> Path:
    """Write params and config; identical inputs produce identical bytes"""
    path = Path(path)
    expected = parameter_shapes(config)
    for name, shape in expected.items():
        if name not in params or params[name].shape != shape:
            raise CheckpointShapeError("Parameter does not match the configuration",
                                       tensor_name=name, context={"expected": list(shape)})

    manifest: Dict[str, str] = {}
    for key, value in (metadata or {}).items():
        if "=" in key or "\n" in key or key.startswith(MODEL_PREFIX):
            raise ConfigError("Invalid checkpoint metadata key", {"key": key})
        manifest[key] = _format_value(value)
    for key, value in config.to_manifest().items():
        manifest[MODEL_PREFIX + key] = value

    lines = [f"{MAGIC} {FORMAT_VERSION}"]
    lines += [f"{key}={manifest[key]}" for key in sorted(manifest)]
    lines.append(f"tensors={len(expected)}")
    chunks = ["\n".join(lines).encode("utf-8") + b"\n\n"]
    for name, shape in expected.items():
        dims = "x".join(str(dim) for dim in shape)
        chunks.append(f"tensor {name} {dims}\n".encode("utf-8"))
        chunks.append(np.ascontiguousarray(params[name].data, dtype=STORAGE_DTYPE).tobytes())

    path.parent.mkdir(parents=True, exist_ok=True)
    temporary = path.with_name(path.name + ".tmp")
    with open(temporary, "wb") as handle:
        for chunk in chunks:
            handle.write(chunk)
    os.replace(temporary, path)
    logger.info("checkpoint_saved", path=str(path), tensors=len(expected))
    return path


def _parse_header(blob: bytes, path: Path) -> Tuple[Dict[str, str], int, int]:
    end = blob.find(b"\n\n")
    if end < 0:
        raise CorruptCheckpointError("Checkpoint manifest is incomplete", {"path": str(path)})
    try:
        lines = blob[:end].decode("utf-8").split("\n")
    except UnicodeDecodeError as exc:
        raise CorruptCheckpointError("Checkpoint manifest is not text",
                                     {"path": str(path)}) from exc

    magic, _, version = lines[0].partition(" ")
    if magic != MAGIC:
        raise CorruptCheckpointError("Not an EDNN checkpoint", {"path": str(path)})
    if version != str(FORMAT_VERSION):
        raise CheckpointVersionError("Unsupported checkpoint version",
                                     {"path": str(path), "version": version,
                                      "supported": FORMAT_VERSION})

    manifest: Dict[str, str] = {}
    for line in lines[1:]:
        key, sep, value = line.partition("=")
        if not sep:
            raise CorruptCheckpointError("Malformed manifest line",
                                         {"path": str(path), "line": line[:60]})
        manifest[key] = value
    try:
        count = int(manifest.pop("tensors"))
    except (KeyError, ValueError) as exc:
        raise CorruptCheckpointError("Manifest lacks a tensor count",
                                     {"path": str(path)}) from exc
    return manifest, count, end + 2


def _read_tensors(blob: bytes, offset: int, count: int,
                  path: Path) -> "OrderedDict[str, np.ndarray]":
    tensors: "OrderedDict[str, np.ndarray]" = OrderedDict()
    for _ in range(count):
        newline = blob.find(b"\n", offset)
        if newline < 0:
            raise CorruptCheckpointError("Truncated tensor header", {"path": str(path)})
        parts = blob[offset:newline].decode("utf-8", errors="replace").split(" ")
        if len(parts) != 3 or parts[0] != "tensor":
            raise CorruptCheckpointError("Malformed tensor header",
                                         {"path": str(path), "header": " ".join(parts)[:60]})
        name = parts[1]
        try:
            shape = tuple(int(dim) for dim in parts[2].split("x"))
        except ValueError as exc:
            raise CorruptCheckpointError("Malformed tensor shape",
                                         {"path": str(path), "tensor": name}) from exc
        start = newline + 1
        stop = start + int(np.prod(shape)) * STORAGE_DTYPE.itemsize
        if stop > len(blob):
            raise CorruptCheckpointError("Truncated tensor data",
                                         {"path": str(path), "tensor": name})
        tensors[name] = np.frombuffer(blob[start:stop], dtype=STORAGE_DTYPE).reshape(shape).copy()
        offset = stop
    if offset != len(blob):
        raise CorruptCheckpointError("Trailing bytes after the last tensor",
                                     {"path": str(path), "extra": len(blob) - offset})
    return tensors


def _check_shapes(tensors: Mapping[str, np.ndarray], config: EDNNConfig):
    expected = parameter_shapes(config)
    for name, shape in expected.items():
        if name not in tensors:
            raise CheckpointShapeError("Checkpoint is missing a tensor", tensor_name=name,
                                       context={"expected": list(shape)})
        if tensors[name].shape != shape:
            raise CheckpointShapeError(
                "Stored tensor shape differs from the configuration", tensor_name=name,
                context={"stored": list(tensors[name].shape), "expected": list(shape)})
    for name in tensors:
        if name not in expected:
            raise CheckpointShapeError("Checkpoint has an unexpected tensor", tensor_name=name)


def load_checkpoint(path: Path, expected_config: Optional[EDNNConfig] = None) -> Checkpoint:
    """Read a checkpoint; with expected_config, verify every tensor against it"""
    path = Path(path)
    try:
        blob = path.read_bytes()
    except OSError as exc:
        raise CorruptCheckpointError("Cannot read checkpoint", {"path": str(path)}) from exc
    if not blob:
        raise CorruptCheckpointError("Checkpoint file is empty", {"path": str(path)})

    manifest, count, offset = _parse_header(blob, path)
    tensors = _read_tensors(blob, offset, count, path)

    model_fields = {key[len(MODEL_PREFIX):]: value for key, value in manifest.items()
                    if key.startswith(MODEL_PREFIX)}
    try:
        config = EDNNConfig.from_manifest(model_fields)
    except (KeyError, ValueError) as exc:
        raise CorruptCheckpointError("Manifest does not describe a model",
                                     {"path": str(path)}) from exc
    _check_shapes(tensors, config)
    if expected_config is not None:
        _check_shapes(tensors, expected_config)

    metadata = {key: value for key, value in manifest.items()
                if not key.startswith(MODEL_PREFIX)}
    return Checkpoint(config=config, params=ParamSet(tensors), metadata=metadata)
