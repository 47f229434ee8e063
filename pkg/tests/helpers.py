"""
Test helpers
Central finite differences, synthetic glyph pools and IDX writers
"""
import struct
from pathlib import Path
from typing import Callable, List, Sequence

import numpy as np

from ednn.model.network import parameter_shapes
from ednn.shared.models.network import EDNNConfig, Precision
from ednn.tensor_math import ParamSet, Tensor, param

FD_EPSILON = 1e-5


def numeric_gradients(build: Callable[[List[Tensor]], Tensor], arrays: Sequence[np.ndarray],
                      eps: float = FD_EPSILON) -> List[np.ndarray]:
    """Central finite differences of a scalar graph with respect to every input array"""
    def value() -> float:
        return build([Tensor(array, dtype=np.float64) for array in arrays]).item()

    gradients = []
    for array in arrays:
        grad = np.zeros_like(array, dtype=np.float64)
        for index in np.ndindex(array.shape):
            original = array[index]
            array[index] = original + eps
            plus = value()
            array[index] = original - eps
            minus = value()
            array[index] = original
            grad[index] = (plus - minus) / (2.0 * eps)
        gradients.append(grad)
    return gradients


def analytic_gradients(build: Callable[[List[Tensor]], Tensor],
                       arrays: Sequence[np.ndarray]) -> List[np.ndarray]:
    leaves = [param(np.array(array, dtype=np.float64)) for array in arrays]
    build(leaves).backward()
    return [leaf.grad if leaf.grad is not None else np.zeros_like(leaf.data) for leaf in leaves]


def relative_error(analytic: np.ndarray, numeric: np.ndarray, floor: float = 1e-4) -> float:
    """Largest elementwise |a - n| / max(|a|, |n|, floor); the floor absorbs round-off near zero"""
    analytic = np.asarray(analytic, dtype=np.float64)
    numeric = np.asarray(numeric, dtype=np.float64)
    if analytic.size == 0:
        return 0.0
    scale = np.maximum(np.maximum(np.abs(analytic), np.abs(numeric)), floor)
    return float(np.max(np.abs(analytic - numeric) / scale))


def blob_glyph(value: int, side: int = 28, margin: int = 8) -> np.ndarray:
    """A filled square centred in a zero border: one connected component per glyph"""
    glyph = np.zeros((side, side), dtype=np.uint8)
    glyph[margin:side - margin, margin:side - margin] = value
    return glyph


def synthetic_mnist(per_digit: int = 20, digits: Sequence[int] = tuple(range(10))):
    """Interleaved images/labels in file order, like the real training file"""
    images, labels = [], []
    for index in range(per_digit):
        for digit in digits:
            images.append(blob_glyph(100 + 10 * digit + index % 5))
            labels.append(digit)
    return np.stack(images), np.array(labels, dtype=np.uint8)


def write_idx_images(path: Path, images: np.ndarray) -> Path:
    count, rows, cols = images.shape
    path.write_bytes(struct.pack(">4i", 2051, count, rows, cols)
                     + np.asarray(images, dtype=np.uint8).tobytes())
    return path


def write_idx_labels(path: Path, labels: np.ndarray) -> Path:
    path.write_bytes(struct.pack(">2i", 2049, len(labels))
                     + np.asarray(labels, dtype=np.uint8).tobytes())
    return path


def constant_params(config: EDNNConfig, head_bias: float,
                    precision: Precision = Precision.F32) -> ParamSet:
    """Every weight zero; each tile then contributes exactly head_bias per class"""
    arrays = {name: np.zeros(shape) for name, shape in parameter_shapes(config).items()}
    arrays["head.bias"] = np.full(config.classes, head_bias)
    return ParamSet(arrays, dtype=precision.dtype)
