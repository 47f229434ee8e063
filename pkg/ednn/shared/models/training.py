"""
Training Model
Training run configuration, per-epoch records and evaluation reports
Based on the loss-threshold stopping rule and the (-0.5, 0.5) rounding interval
"""
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple

from pydantic import BaseModel, ConfigDict, Field, model_validator

from ednn.shared.models.network import EDNNConfig, Precision


class AugmentationKind(str, Enum):
    """On-the-fly, label-preserving augmentations"""
    ROTATE90 = "rotate90"
    DOWNSCALE = "downscale"


DEFAULT_MIN_EPOCHS = 100
DEFAULT_MAX_EPOCHS = 500


class StopReason(str, Enum):
    LOSS_THRESHOLD = "loss_threshold"
    MAX_EPOCHS = "max_epochs"


class TrainConfig(BaseModel):
    """Everything a training run needs besides the data itself"""

    model_config = ConfigDict(frozen=True, extra="forbid")

    dataset_dir: Path
    out: Path = Path("ednn.ckpt")
    model: EDNNConfig = Field(default_factory=EDNNConfig)
    learning_rate: float = Field(1e-4, gt=0)
    beta1: float = Field(0.9, ge=0, lt=1)
    beta2: float = Field(0.999, ge=0, lt=1)
    epsilon: float = Field(1e-8, gt=0)
    loss_threshold: float = Field(1e-3, gt=0)
    min_epochs: int = Field(DEFAULT_MIN_EPOCHS, ge=1)
    max_epochs: int = Field(DEFAULT_MAX_EPOCHS, ge=1)
    batch_size: int = Field(32, ge=1)
    seed: int = 0
    augment: Tuple[AugmentationKind, ...] = ()
    downscale_range: Tuple[float, float] = (0.5, 1.0)
    precision: Precision = Precision.F32
    threads: int = Field(1, ge=1)
    checkpoint_every: int = Field(10, ge=1)
    init_checkpoint: Optional[Path] = None

    @model_validator(mode="before")
    @classmethod
    def _default_min_epochs(cls, data: Any) -> Any:
        """An unset min_epochs never exceeds max_epochs"""
        if isinstance(data, dict) and data.get("min_epochs") is None:
            ceiling = data.get("max_epochs") or DEFAULT_MAX_EPOCHS
            data = {**data, "min_epochs": max(1, min(DEFAULT_MIN_EPOCHS, int(ceiling)))}
        return data

    @model_validator(mode="after")
    def _check_bounds(self) -> "TrainConfig":
        if self.min_epochs > self.max_epochs:
            raise ValueError("min_epochs exceeds max_epochs")
        low, high = self.downscale_range
        if not 0 < low <= high <= 1:
            raise ValueError("downscale_range must lie within (0, 1]")
        return self


@dataclass
class EpochRecord:
    """One line of the training log"""

    epoch: int
    loss: float
    seconds: float

    def to_dict(self) -> Dict[str, Any]:
        return {"epoch": self.epoch, "loss": self.loss, "seconds": self.seconds}


@dataclass
class TrainingResult:
    """Outcome of a training run"""

    checkpoint: Path
    epochs: List[EpochRecord] = field(default_factory=list)
    stop_reason: StopReason = StopReason.MAX_EPOCHS

    @property
    def final_loss(self) -> float:
        return self.epochs[-1].loss if self.epochs else float("nan")

    def to_dict(self) -> Dict[str, Any]:
        return {
            "checkpoint": str(self.checkpoint),
            "epochs_run": len(self.epochs),
            "final_loss": self.final_loss,
            "stop_reason": self.stop_reason.value,
            "log": [record.to_dict() for record in self.epochs],
        }


@dataclass
class ExampleRecord:
    """Prediction for one evaluated image"""

    file: str
    predicted: Dict[str, float]
    label: Dict[str, int]

    def errors(self) -> Dict[str, float]:
        return {name: self.predicted[name] - self.label[name] for name in self.label}

    def to_dict(self) -> Dict[str, Any]:
        return {"file": self.file, "predicted": self.predicted,
                "label": self.label, "error": self.errors()}


@dataclass
class ErrorHistogram:
    """Histogram of (prediction - label) at a fixed bin width"""

    edges: List[float]
    counts: List[int]

    def mass(self) -> int:
        return sum(self.counts)

    def mass_within(self, radius: float) -> int:
        """Count held by bins lying entirely inside [-radius, radius]"""
        return sum(count for low, high, count in zip(self.edges, self.edges[1:], self.counts)
                   if low >= -radius and high <= radius)

    def to_dict(self) -> Dict[str, Any]:
        return {"edges": self.edges, "counts": self.counts}


@dataclass
class EvalReport:
    """Per-class rounding accuracy and error distribution over a test set"""

    classes: List[str]
    accuracy: Dict[str, float]
    histograms: Dict[str, ErrorHistogram]
    loss: float
    error_summary: Dict[str, Dict[str, float]] = field(default_factory=dict)
    records: List[ExampleRecord] = field(default_factory=list)

    @property
    def size(self) -> int:
        return len(self.records)

    def to_dict(self, include_examples: bool = False) -> Dict[str, Any]:
        result = {
            "classes": self.classes,
            "size": self.size,
            "loss": self.loss,
            "accuracy": self.accuracy,
            "histograms": {name: hist.to_dict() for name, hist in self.histograms.items()},
            "error_summary": self.error_summary,
        }
        if include_examples:
            result["examples"] = [record.to_dict() for record in self.records]
        return result
