"""
MNIST IDX Ingestion
Big-endian IDX parsing and the per-digit glyph pool with its train/test partition
"""
import struct
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, Iterable, Tuple

import numpy as np
import structlog

from ednn.shared.models.dataset import Partition
from ednn.shared.models.errors import IdxFormatError, InsufficientExamplesError

logger = structlog.get_logger(__name__)

IMAGE_MAGIC = 2051
LABEL_MAGIC = 2049
GLYPHS_PER_DIGIT = 4800
TEST_GLYPHS_PER_DIGIT = 480
DIGITS = tuple(range(10))


def _read_blob(path: Path) -> bytes:
    try:
        blob = Path(path).read_bytes()
    except OSError as exc:
        raise IdxFormatError("Cannot read IDX file", {"path": str(path)}) from exc
    if not blob:
        raise IdxFormatError("IDX file is empty", {"path": str(path)})
    return blob


def _header(blob: bytes, fields: int, magic: int, path: Path) -> Tuple[int, ...]:
    size = 4 * fields
    if len(blob) < size:
        raise IdxFormatError("IDX header is truncated",
                             {"path": str(path), "bytes": len(blob)})
    values = struct.unpack(f">{fields}i", blob[:size])
    if values[0] != magic:
        raise IdxFormatError("Magic number mismatch",
                             {"path": str(path), "magic": values[0], "expected": magic})
    return values[1:]


def read_idx_images(path: Path) -> np.ndarray:
    """Images file as [count, rows, cols] uint8"""
    blob = _read_blob(path)
    count, rows, cols = _header(blob, 4, IMAGE_MAGIC, path)
    if min(count, rows, cols) < 0:
        raise IdxFormatError("Negative IDX dimension",
                             {"path": str(path), "dims": [count, rows, cols]})
    expected = count * rows * cols
    body = blob[16:]
    if len(body) < expected:
        raise IdxFormatError("IDX image data is truncated",
                             {"path": str(path), "bytes": len(body), "expected": expected})
    return np.frombuffer(body[:expected], dtype=np.uint8).reshape(count, rows, cols).copy()


def read_idx_labels(path: Path) -> np.ndarray:
    """Labels file as [count] uint8"""
    blob = _read_blob(path)
    (count,) = _header(blob, 2, LABEL_MAGIC, path)
    body = blob[8:]
    if count < 0 or len(body) < count:
        raise IdxFormatError("IDX label data is truncated",
                             {"path": str(path), "bytes": len(body), "expected": count})
    return np.frombuffer(body[:count], dtype=np.uint8).copy()


@dataclass
class DigitPool:
    """Per-digit glyphs; the first glyphs of each digit train, the last test_per_digit test"""

    glyphs: Dict[int, np.ndarray]
    test_per_digit: int = TEST_GLYPHS_PER_DIGIT

    @classmethod
    def from_arrays(cls, images: np.ndarray, labels: np.ndarray,
                    per_digit: int = GLYPHS_PER_DIGIT,
                    test_per_digit: int = TEST_GLYPHS_PER_DIGIT,
                    digits: Iterable[int] = DIGITS) -> "DigitPool":
        """Group by digit in file order and truncate each digit to per_digit glyphs"""
        images = np.asarray(images, dtype=np.uint8)
        labels = np.asarray(labels)
        if images.shape[0] != labels.shape[0]:
            raise IdxFormatError("Image and label counts differ",
                                 {"images": int(images.shape[0]), "labels": int(labels.shape[0])})
        if not 0 <= test_per_digit < per_digit:
            raise InsufficientExamplesError("Test share must leave training glyphs",
                                            {"per_digit": per_digit,
                                             "test_per_digit": test_per_digit})
        glyphs: Dict[int, np.ndarray] = {}
        for digit in digits:
            members = np.flatnonzero(labels == digit)
            if members.size < per_digit:
                raise InsufficientExamplesError("Too few examples of a digit",
                                                {"digit": int(digit), "available": int(members.size),
                                                 "required": per_digit})
            glyphs[int(digit)] = images[members[:per_digit]]
        return cls(glyphs=glyphs, test_per_digit=test_per_digit)

    @property
    def digits(self) -> Tuple[int, ...]:
        return tuple(sorted(self.glyphs))

    def size(self, digit: int) -> int:
        return int(self.glyphs[digit].shape[0])

    def indices(self, digit: int, partition: Partition) -> np.ndarray:
        """Glyph indices of a digit reserved for one partition"""
        if digit not in self.glyphs:
            raise InsufficientExamplesError("Digit is not in the pool", {"digit": digit})
        boundary = self.size(digit) - self.test_per_digit
        if Partition(partition) == Partition.TRAIN:
            return np.arange(0, boundary)
        return np.arange(boundary, self.size(digit))

    def glyph(self, digit: int, index: int) -> np.ndarray:
        return self.glyphs[digit][index]

    def summary(self) -> Dict[str, Dict[str, int]]:
        return {
            str(digit): {"glyphs": self.size(digit),
                         "train": self.size(digit) - self.test_per_digit,
                         "test": self.test_per_digit}
            for digit in self.digits
        }


def load_idx(images_path: Path, labels_path: Path, per_digit: int = GLYPHS_PER_DIGIT,
             test_per_digit: int = TEST_GLYPHS_PER_DIGIT,
             digits: Iterable[int] = DIGITS) -> DigitPool:
    """Read an MNIST image/label pair into a partitioned DigitPool"""
    images = read_idx_images(images_path)
    labels = read_idx_labels(labels_path)
    pool = DigitPool.from_arrays(images, labels, per_digit, test_per_digit, digits)
    logger.info("digit_pool_loaded", images=str(images_path), digits=len(pool.digits),
                per_digit=per_digit)
    return pool
