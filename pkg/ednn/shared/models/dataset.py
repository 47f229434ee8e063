"""
Dataset Specification Model
Counting dataset variants, generator parameters, count labels and placement ledger
Presets follow the collage datasets (MNIST-1 ... MNIST-2-occ-vs) plus the 2d SHAPES stand-ins
"""
from dataclasses import dataclass, field, asdict
from enum import Enum
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator

from ednn.shared.models.errors import GenerationError


class DatasetVariant(str, Enum):
    """Supported dataset variants"""
    MNIST_1 = "MNIST-1"
    MNIST_2 = "MNIST-2"
    MNIST_10 = "MNIST-10"
    MNIST_2_OCC = "MNIST-2-occ"
    MNIST_2_OCC_VS = "MNIST-2-occ-vs"
    SHAPES_1 = "SHAPES-1"
    SHAPES_2 = "SHAPES-2"


class Partition(str, Enum):
    TRAIN = "train"
    TEST = "test"


@dataclass(frozen=True)
class VariantPreset:
    """Fixed properties of a variant"""

    classes: Tuple[str, ...]
    l_max: int
    occlusion: bool
    scale_range: Optional[Tuple[float, float]] = None
    channels: int = 1


VARIANT_PRESETS: Dict[DatasetVariant, VariantPreset] = {
    DatasetVariant.MNIST_1: VariantPreset(("5",), 25, occlusion=False),
    DatasetVariant.MNIST_2: VariantPreset(("4", "8"), 12, occlusion=False),
    DatasetVariant.MNIST_10: VariantPreset(tuple(str(d) for d in range(10)), 6, occlusion=False),
    DatasetVariant.MNIST_2_OCC: VariantPreset(("4", "8"), 15, occlusion=True),
    DatasetVariant.MNIST_2_OCC_VS: VariantPreset(("4", "8"), 15, occlusion=True,
                                                 scale_range=(0.5, 1.5)),
    # partial overlap allowed, full containment rejected
    DatasetVariant.SHAPES_1: VariantPreset(("disc",), 5, occlusion=True, channels=3),
    DatasetVariant.SHAPES_2: VariantPreset(("disc", "triangle"), 5, occlusion=True, channels=3),
}


class DatasetSpec(BaseModel):
    """Generator parameters for one dataset"""

    model_config = ConfigDict(frozen=True, extra="forbid")

    variant: DatasetVariant = DatasetVariant.MNIST_1
    l_max: int = Field(0, ge=0)
    canvas: int = Field(256, ge=8)
    train_count: int = Field(1000, ge=0)
    test_count: int = Field(100, ge=0)
    seed: int = 0
    glyph_size: int = Field(28, ge=1)
    max_attempts: int = Field(1000, ge=1)
    max_restarts: int = Field(10, ge=1)

    @model_validator(mode="before")
    @classmethod
    def _default_l_max(cls, data: Any) -> Any:
        if isinstance(data, dict) and data.get("l_max") is None:
            variant = DatasetVariant(data.get("variant", DatasetVariant.MNIST_1))
            data = {**data, "l_max": VARIANT_PRESETS[variant].l_max}
        return data

    @model_validator(mode="after")
    def _glyphs_fit_canvas(self) -> "DatasetSpec":
        largest = self.glyph_size
        if self.scale_range:
            largest = int(round(self.glyph_size * self.scale_range[1]))
        if not self.is_shapes and largest > self.canvas:
            raise ValueError("canvas smaller than the largest glyph")
        return self

    @property
    def preset(self) -> VariantPreset:
        return VARIANT_PRESETS[self.variant]

    @property
    def classes(self) -> Tuple[str, ...]:
        return self.preset.classes

    @property
    def occlusion(self) -> bool:
        return self.preset.occlusion

    @property
    def scale_range(self) -> Optional[Tuple[float, float]]:
        return self.preset.scale_range

    @property
    def channels(self) -> int:
        return self.preset.channels

    @property
    def is_shapes(self) -> bool:
        return self.variant in (DatasetVariant.SHAPES_1, DatasetVariant.SHAPES_2)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "variant": self.variant.value,
            "classes": list(self.classes),
            "l_max": self.l_max,
            "canvas": self.canvas,
            "occlusion": self.occlusion,
            "scale_range": list(self.scale_range) if self.scale_range else None,
            "channels": self.channels,
            "train_count": self.train_count,
            "test_count": self.test_count,
            "seed": self.seed,
            "glyph_size": self.glyph_size,
        }


@dataclass
class CountLabel:
    """Per-class non-negative integer counts for one image"""

    counts: Dict[str, int] = field(default_factory=dict)

    def validate(self, l_max: int):
        for name, value in self.counts.items():
            if not 0 <= value <= l_max:
                raise GenerationError("Count outside [0, L_max]",
                                      {"class": name, "count": value, "l_max": l_max})

    def as_vector(self, classes: Sequence[str]) -> np.ndarray:
        return np.array([self.counts.get(name, 0) for name in classes], dtype=np.int64)

    def total(self) -> int:
        return sum(self.counts.values())

    def to_dict(self) -> Dict[str, int]:
        return dict(self.counts)


@dataclass(frozen=True)
class Placement:
    """One object placed by a generator (the ledger entry behind a label)"""

    class_name: str
    top: int
    left: int
    height: int
    width: int
    source_index: int = -1
    partition: str = Partition.TRAIN.value

    def box(self) -> Tuple[int, int, int, int]:
        return self.top, self.left, self.top + self.height, self.left + self.width

    def intersects(self, other: "Placement") -> bool:
        top, left, bottom, right = self.box()
        o_top, o_left, o_bottom, o_right = other.box()
        return top < o_bottom and o_top < bottom and left < o_right and o_left < right

    def contains(self, other: "Placement") -> bool:
        top, left, bottom, right = self.box()
        o_top, o_left, o_bottom, o_right = other.box()
        return top <= o_top and left <= o_left and o_bottom <= bottom and o_right <= right

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)


@dataclass
class GeneratedImage:
    """Pixels plus the ledger of everything composited into them"""

    pixels: np.ndarray
    label: CountLabel
    placements: List[Placement] = field(default_factory=list)

    def ledger_counts(self, classes: Sequence[str]) -> Dict[str, int]:
        counts = {name: 0 for name in classes}
        for placement in self.placements:
            counts[placement.class_name] += 1
        return counts
