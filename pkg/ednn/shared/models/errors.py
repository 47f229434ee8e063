"""
Error Model
Structured error hierarchy shared by every EDNN component
Each error carries a stable code and a context dict so the CLI can emit it as JSON
"""
from typing import Any, Dict, Optional


class EDNNError(Exception):
    """Base class for all structured EDNN errors"""

    code = "ednn_error"

    def __init__(self, message: str, context: Optional[Dict[str, Any]] = None):
        super().__init__(message)
        self.message = message
        self.context: Dict[str, Any] = dict(context or {})

    def to_dict(self) -> Dict[str, Any]:
        return {
            "code": self.code,
            "type": type(self).__name__,
            "message": self.message,
            "context": self.context,
        }

    def __str__(self) -> str:
        if not self.context:
            return self.message
        details = ", ".join(f"{key}={value!r}" for key, value in self.context.items())
        return f"{self.message} ({details})"


class ShapeError(EDNNError):
    """Tensor extents disagree with what an operation requires"""
    code = "shape_mismatch"


class ConfigError(EDNNError):
    """Invalid configuration value or combination"""
    code = "invalid_config"


class TilingError(EDNNError):
    """Image cannot be decomposed on the requested focus grid"""
    code = "tiling_error"


class RegionError(EDNNError):
    """Region rectangle falls outside the focus grid"""
    code = "region_out_of_bounds"


class DivergenceError(EDNNError):
    """Non-finite loss or gradient encountered during optimization"""
    code = "training_diverged"


class IdxFormatError(EDNNError):
    """Malformed or truncated IDX file"""
    code = "idx_format_error"


class InsufficientExamplesError(EDNNError):
    """A digit class has fewer examples than the pool requires"""
    code = "insufficient_examples"


class GenerationError(EDNNError):
    """A collage or shapes image could not be generated"""
    code = "generation_failed"


class DatasetError(EDNNError):
    """Dataset on disk is missing, unreadable or inconsistent"""
    code = "dataset_error"


class CheckpointError(EDNNError):
    """Base class for checkpoint persistence errors"""
    code = "checkpoint_error"


class CheckpointVersionError(CheckpointError):
    code = "checkpoint_version_mismatch"


class CorruptCheckpointError(CheckpointError):
    code = "checkpoint_corrupt"


class CheckpointShapeError(CheckpointError):
    """Stored tensor does not match the shape the configuration expects"""

    code = "checkpoint_shape_mismatch"

    def __init__(self, message: str, tensor_name: str,
                 context: Optional[Dict[str, Any]] = None):
        super().__init__(message, {"tensor": tensor_name, **(context or {})})
        self.tensor_name = tensor_name


class ChannelMismatchError(EDNNError):
    """Image channel count differs from the model's channel count"""
    code = "channel_mismatch"


class ImageReadError(EDNNError):
    code = "image_unreadable"


class AugmentationError(EDNNError):
    code = "augmentation_error"
