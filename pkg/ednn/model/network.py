"""
EDNN Network
Shared per-tile CNN, summation head and prediction with contribution capture
Every tile of every image goes through the same weights; per-tile outputs are
reshaped to [batch, tiles, classes] and summed over tiles to give counts
"""
from collections import OrderedDict
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Dict, List, Mapping, Optional, Sequence, Tuple, Union

import numpy as np
import structlog

from ednn.shared.models.errors import ChannelMismatchError, DivergenceError, ShapeError
from ednn.shared.models.grid import TileGrid
from ednn.shared.models.network import EDNNConfig, Precision
from ednn.tensor_math import (
    Adam,
    ParamSet,
    Tensor,
    backward,
    conv2d,
    dense,
    mse_loss,
    relu,
    reshape,
    tile_sum,
)
from ednn.tiler.tiling import ContributionMap, TileBatch, as_hwd, extract_tiles, pad_to_multiple

logger = structlog.get_logger(__name__)

ParamsLike = Union[ParamSet, Mapping[str, Tensor]]


def parameter_shapes(config: EDNNConfig) -> "OrderedDict[str, Tuple[int, ...]]":
    """Shapes of every trainable tensor, in construction order"""
    config.validate_architecture()
    shapes: "OrderedDict[str, Tuple[int, ...]]" = OrderedDict()
    in_channels = config.channels
    for layer in range(config.n_conv_layers):
        shapes[f"conv{layer}.kernel"] = (config.kernel_size, config.kernel_size,
                                         in_channels, config.kernels)
        shapes[f"conv{layer}.bias"] = (config.kernels,)
        in_channels = config.kernels
    shapes["dense.weight"] = (config.flatten_size, config.dense_width)
    shapes["dense.bias"] = (config.dense_width,)
    shapes["head.weight"] = (config.dense_width, config.classes)
    shapes["head.bias"] = (config.classes,)
    return shapes


def build(config: EDNNConfig, seed: int = 0,
          precision: Precision = Precision.F32) -> ParamSet:
    """Fan-in scaled normal weights (std sqrt(2 / fan_in)), zero biases"""
    rng = np.random.default_rng(seed)
    arrays: Dict[str, np.ndarray] = OrderedDict()
    for name, shape in parameter_shapes(config).items():
        if name.endswith(".bias"):
            arrays[name] = np.zeros(shape)
        else:
            fan_in = int(np.prod(shape[:-1]))
            arrays[name] = rng.normal(0.0, np.sqrt(2.0 / fan_in), size=shape)
    return ParamSet(arrays, dtype=precision.dtype)


def normalize_pixels(pixels: np.ndarray, dtype: np.dtype) -> np.ndarray:
    """8-bit pixel values to [0, 1] in the compute dtype"""
    return np.asarray(pixels).astype(dtype) / np.asarray(255.0, dtype=dtype)


def frozen(params: ParamsLike) -> Dict[str, Tensor]:
    """Gradient-free views of the parameters for inference"""
    return {name: tensor.detach() for name, tensor in params.items()}


def forward_tiles(tiles: Union[TileBatch, np.ndarray], params: ParamsLike,
                  config: EDNNConfig) -> Tensor:
    """Apply the shared network to every tile: [M, s, s, d] -> [M, l]"""
    data = tiles.data if isinstance(tiles, TileBatch) else np.asarray(tiles)
    side = config.tile_size
    if data.ndim != 4 or data.shape[1:] != (side, side, config.channels):
        raise ShapeError("Tile batch does not match the network's tile shape",
                         {"tiles": data.shape, "expected": (side, side, config.channels)})

    dtype = params["head.weight"].dtype
    x = Tensor(normalize_pixels(data, dtype), dtype=dtype)
    for layer in range(config.n_conv_layers):
        x = relu(conv2d(x, params[f"conv{layer}.kernel"], params[f"conv{layer}.bias"],
                        stride=config.stride))
    x = reshape(x, (data.shape[0], config.flatten_size))
    x = relu(dense(x, params["dense.weight"], params["dense.bias"]))
    # linear head: contributions may be negative
    return dense(x, params["head.weight"], params["head.bias"])


def prepare_batch(images: Sequence[np.ndarray], config: EDNNConfig) -> np.ndarray:
    """Pad every image to a multiple of f and stack as [B, H, W, d]"""
    prepared = []
    for index, image in enumerate(images):
        array = as_hwd(image)
        if array.shape[2] != config.channels:
            raise ChannelMismatchError(
                "Image channel count differs from the model",
                {"image": index, "channels": array.shape[2], "expected": config.channels},
            )
        prepared.append(pad_to_multiple(array, config.focus))
    shapes = {array.shape for array in prepared}
    if len(shapes) != 1:
        raise ShapeError("Images in one batch must share padded extents",
                         {"shapes": sorted(shapes)})
    return np.stack(prepared)


def forward_counts(batch: np.ndarray, params: ParamsLike,
                   config: EDNNConfig) -> Tuple[Tensor, Tensor, TileGrid]:
    """Graph from a padded [B, H, W, d] batch to (counts [B, l], contributions [B, T, l])"""
    tiles = extract_tiles(batch, config.focus, config.context)
    per_tile = forward_tiles(tiles, params, config)
    contribs = reshape(per_tile, (tiles.n_batch, tiles.n_tiles, config.classes))
    return tile_sum(contribs), contribs, tiles.grid


def predict(images: Sequence[np.ndarray], params: ParamsLike, config: EDNNConfig,
            chunk_size: Optional[int] = None,
            threads: int = 1) -> Tuple[np.ndarray, ContributionMap]:
    """Counts and the contribution map from the same forward pass.

    Images are evaluated in chunks of chunk_size (all at once when None);
    with threads > 1 chunks run on a thread pool. A fixed chunk size gives the same
    bits for any thread count; different chunk sizes agree up to matmul rounding.
    """
    batch = prepare_batch(images, config)
    inference = frozen(params)
    size = chunk_size or len(batch)
    chunks = [batch[start:start + size] for start in range(0, len(batch), size)]

    def run(chunk: np.ndarray) -> Tuple[np.ndarray, np.ndarray, TileGrid]:
        counts, contribs, grid = forward_counts(chunk, inference, config)
        return counts.data, contribs.data, grid

    if threads > 1 and len(chunks) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(run, chunks))
    else:
        results = [run(chunk) for chunk in chunks]

    counts = np.concatenate([result[0] for result in results])
    values = np.concatenate([result[1] for result in results])
    contribs = ContributionMap(values=values, grid=results[0][2],
                               class_names=config.names())
    return counts, contribs


@dataclass
class StepResult:
    """Loss before the update and, when measured, after it"""

    pre_step_loss: float
    post_step_loss: Optional[float]
    params: ParamSet

    @property
    def loss(self) -> float:
        return self.post_step_loss if self.post_step_loss is not None else self.pre_step_loss


def batch_loss(batch: np.ndarray, labels: np.ndarray, params: ParamsLike,
               config: EDNNConfig) -> Tensor:
    counts, _, _ = forward_counts(batch, params, config)
    return mse_loss(counts, np.asarray(labels))


def training_step(images: Union[np.ndarray, Sequence[np.ndarray]], labels: np.ndarray,
                  params: ParamSet, optimizer: Adam, config: EDNNConfig,
                  measure_after: bool = True) -> StepResult:
    """One Adam step on the MSE between summed contributions and count labels"""
    batch = images if isinstance(images, np.ndarray) and images.ndim == 4 \
        else prepare_batch(images, config)
    labels = np.asarray(labels)
    if labels.shape != (batch.shape[0], config.classes):
        raise ShapeError("Labels must be [batch, classes]",
                         {"labels": labels.shape, "expected": (batch.shape[0], config.classes)})
    if np.any(labels < 0):
        raise ShapeError("Count labels must be non-negative", {"min": int(labels.min())})

    loss = batch_loss(batch, labels, params, config)
    pre_step = loss.item()
    if not np.isfinite(pre_step):
        raise DivergenceError("Loss is not finite", {"loss": pre_step, "step": params.adam.t})

    grads = backward(loss, params)
    optimizer.step(params, grads)

    post_step = None
    if measure_after:
        post_step = batch_loss(batch, labels, frozen(params), config).item()
    return StepResult(pre_step_loss=pre_step, post_step_loss=post_step, params=params)


class EDNNModel:
    """Configuration and parameters of one extensive network"""

    def __init__(self, config: EDNNConfig, params: ParamSet):
        self.config = config
        self.params = params

    @classmethod
    def build(cls, config: EDNNConfig, seed: int = 0,
              precision: Precision = Precision.F32) -> "EDNNModel":
        model = cls(config, build(config, seed, precision))
        logger.debug("model_built", layers=config.n_conv_layers,
                     spatial_chain=config.spatial_chain(), parameters=len(model.params))
        return model

    def predict(self, images: Sequence[np.ndarray], chunk_size: Optional[int] = None,
                threads: int = 1) -> Tuple[np.ndarray, ContributionMap]:
        return predict(images, self.params, self.config, chunk_size, threads)

    def training_step(self, images, labels: np.ndarray, optimizer: Adam,
                      measure_after: bool = True) -> StepResult:
        return training_step(images, labels, self.params, optimizer, self.config,
                             measure_after)

    def astype(self, precision: Precision) -> "EDNNModel":
        return EDNNModel(self.config, self.params.astype(precision.dtype))

    def describe(self) -> List[Dict[str, object]]:
        return [{"name": name, "shape": list(shape)}
                for name, shape in self.params.shapes().items()]
