"""Minimal tensor core: reverse-mode differentiation, layer primitives and Adam."""
from ednn.tensor_math.ops import (
    conv2d,
    dense,
    mse_loss,
    param,
    relu,
    reshape,
    same_padding,
    tile_sum,
)
from ednn.tensor_math.optim import Adam, AdamState, ParamSet, adam_step, backward
from ednn.tensor_math.tensor import Tensor, canonical_sum

__all__ = [
    "Adam",
    "AdamState",
    "ParamSet",
    "Tensor",
    "adam_step",
    "backward",
    "canonical_sum",
    "conv2d",
    "dense",
    "mse_loss",
    "param",
    "relu",
    "reshape",
    "same_padding",
    "tile_sum",
]
