"""
Network Configuration Model
Architecture description of the extensive network: tile geometry and layer sizes
The conv layer count follows floor(log2(f + 2c) - 1) with same-padding halving
"""
from enum import Enum
from typing import Any, Dict, List, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator

from ednn.shared.models.errors import ConfigError


class Precision(str, Enum):
    """Compute precision of tensors and parameters"""
    F32 = "f32"
    F64 = "f64"

    @property
    def dtype(self) -> np.dtype:
        return np.dtype(np.float32) if self is Precision.F32 else np.dtype(np.float64)


class EDNNConfig(BaseModel):
    """Focus/context geometry plus the derived CNN hyperparameters"""

    model_config = ConfigDict(frozen=True, extra="forbid")

    focus: int = Field(8, ge=1)
    context: int = Field(8, ge=0)
    channels: int = Field(1, ge=1)
    classes: int = Field(1, ge=1)
    kernels: int = Field(64, ge=1)
    kernel_size: int = Field(4, ge=1)
    stride: int = Field(2, ge=1)
    dense_width: int = Field(1024, ge=1)
    class_names: Tuple[str, ...] = ()

    @model_validator(mode="after")
    def _names_match_classes(self) -> "EDNNConfig":
        if self.class_names and len(self.class_names) != self.classes:
            raise ValueError("class_names must have one entry per class")
        return self

    @property
    def tile_size(self) -> int:
        return self.focus + 2 * self.context

    @property
    def n_conv_layers(self) -> int:
        # floor(log2(t) - 1) computed exactly on integers
        return self.tile_size.bit_length() - 2

    def spatial_chain(self) -> List[int]:
        """Spatial extent before the first conv layer and after each one"""
        chain = [self.tile_size]
        for _ in range(max(self.n_conv_layers, 0)):
            chain.append(-(-chain[-1] // self.stride))
        return chain

    @property
    def flatten_size(self) -> int:
        side = self.spatial_chain()[-1]
        return side * side * self.kernels

    def names(self) -> Tuple[str, ...]:
        return self.class_names or tuple(str(index) for index in range(self.classes))

    def validate_architecture(self):
        """Raise ConfigError when the layer formula yields no usable network"""
        if self.n_conv_layers < 1:
            raise ConfigError(
                "Tile too small for at least one convolution layer",
                {"focus": self.focus, "context": self.context,
                 "tile_size": self.tile_size, "n_conv_layers": self.n_conv_layers},
            )
        if self.spatial_chain()[-1] < 1:
            raise ConfigError("Final convolution extent is below one pixel",
                              {"spatial_chain": self.spatial_chain()})

    def to_manifest(self) -> Dict[str, str]:
        return {
            "focus": str(self.focus),
            "context": str(self.context),
            "channels": str(self.channels),
            "classes": str(self.classes),
            "kernels": str(self.kernels),
            "kernel_size": str(self.kernel_size),
            "stride": str(self.stride),
            "dense_width": str(self.dense_width),
            "class_names": ",".join(self.class_names),
        }

    @classmethod
    def from_manifest(cls, manifest: Dict[str, Any]) -> "EDNNConfig":
        names = manifest.get("class_names", "")
        return cls(
            focus=int(manifest["focus"]),
            context=int(manifest["context"]),
            channels=int(manifest["channels"]),
            classes=int(manifest["classes"]),
            kernels=int(manifest["kernels"]),
            kernel_size=int(manifest["kernel_size"]),
            stride=int(manifest["stride"]),
            dense_width=int(manifest["dense_width"]),
            class_names=tuple(names.split(",")) if names else (),
        )
