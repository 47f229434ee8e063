"""
Image Tiling
Decomposes images into context-padded tiles around non-overlapping focus regions
and reassembles per-tile contributions into per-class density maps
"""
import csv
import io
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from ednn.shared.models.errors import RegionError, ShapeError, TilingError
from ednn.shared.models.grid import GridRect, TileGrid
from ednn.tensor_math.tensor import canonical_sum

ImageBatch = Union[np.ndarray, Sequence[np.ndarray]]


def as_hwd(image: np.ndarray) -> np.ndarray:
    """View a [H, W] or [H, W, d] image as [H, W, d]"""
    array = np.asarray(image)
    if array.ndim == 2:
        return array[:, :, None]
    if array.ndim != 3:
        raise ShapeError("Image must be [H, W] or [H, W, d]", {"shape": array.shape})
    return array


def pad_to_multiple(image: np.ndarray, focus: int) -> np.ndarray:
    """Zero-pad bottom/right so both extents are the smallest multiples of focus"""
    if focus < 1:
        raise TilingError("Focus must be >= 1", {"focus": focus})
    array = np.asarray(image)
    height, width = array.shape[:2]
    pad_h = -height % focus
    pad_w = -width % focus
    if pad_h == 0 and pad_w == 0:
        return array
    widths = [(0, pad_h), (0, pad_w)] + [(0, 0)] * (array.ndim - 2)
    return np.pad(array, widths)


def _stack(images: ImageBatch) -> np.ndarray:
    if isinstance(images, np.ndarray) and images.ndim == 4:
        return images
    arrays = [as_hwd(image) for image in images]
    if not arrays:
        raise TilingError("Empty image batch")
    shapes = {array.shape for array in arrays}
    if len(shapes) != 1:
        raise TilingError("Images in one batch must share extents",
                          {"shapes": sorted(shapes)})
    return np.stack(arrays)


@dataclass
class TileBatch:
    """All tiles of a batch, concatenated along the first axis in row-major order"""

    data: np.ndarray
    grid: TileGrid
    n_batch: int

    @property
    def n_tiles(self) -> int:
        return self.grid.n_tiles

    def image_tiles(self, index: int) -> np.ndarray:
        start = index * self.n_tiles
        return self.data[start:start + self.n_tiles]


def extract_tiles(images: ImageBatch, focus: int, context: int) -> TileBatch:
    """One (f+2c)^2 tile per focus region, context read from a zero border of width c"""
    if context < 0:
        raise TilingError("Context must be >= 0", {"context": context})
    batch = _stack(images)
    n_batch, height, width, channels = batch.shape
    grid = TileGrid(focus=focus, context=context, height=height, width=width)

    padded = np.pad(batch, ((0, 0), (context, context), (context, context), (0, 0)))
    side = grid.tile_size
    # [B, H', W', d, s, s] sampled every f pixels -> [B, rows, cols, s, s, d]
    windows = sliding_window_view(padded, (side, side), axis=(1, 2))[:, ::focus, ::focus]
    windows = windows[:, :grid.rows, :grid.cols].transpose(0, 1, 2, 4, 5, 3)
    tiles = np.ascontiguousarray(windows).reshape(n_batch * grid.n_tiles, side, side, channels)
    return TileBatch(data=tiles, grid=grid, n_batch=n_batch)


@dataclass
class ContributionMap:
    """Per-image, per-tile, per-class contributions; they sum to the count prediction"""

    values: np.ndarray
    grid: TileGrid
    class_names: Tuple[str, ...] = ()

    def __post_init__(self):
        if self.values.ndim != 3 or self.values.shape[1] != self.grid.n_tiles:
            raise ShapeError("Contributions must be [batch, tiles, classes]",
                             {"shape": self.values.shape, "n_tiles": self.grid.n_tiles})

    @property
    def n_batch(self) -> int:
        return self.values.shape[0]

    @property
    def n_classes(self) -> int:
        return self.values.shape[2]

    def counts(self) -> np.ndarray:
        return canonical_sum(self.values, axis=1)


@dataclass
class DensityMap:
    """Per-class contributions laid out on the focus grid of one image"""

    values: np.ndarray
    focus: int
    class_names: Tuple[str, ...] = ()

    @property
    def rows(self) -> int:
        return self.values.shape[0]

    @property
    def cols(self) -> int:
        return self.values.shape[1]

    @property
    def n_classes(self) -> int:
        return self.values.shape[2]

    def names(self) -> Tuple[str, ...]:
        return self.class_names or tuple(str(index) for index in range(self.n_classes))

    def total(self) -> np.ndarray:
        return canonical_sum(self.values.reshape(self.rows * self.cols, self.n_classes), axis=0)

    def upsampled(self, class_index: int) -> np.ndarray:
        """Nearest-neighbour expansion: every cell becomes an f x f pixel block"""
        block = np.ones((self.focus, self.focus), dtype=self.values.dtype)
        return np.kron(self.values[:, :, class_index], block)

    def to_csv(self, class_index: int) -> str:
        buffer = io.StringIO()
        writer = csv.writer(buffer, lineterminator="\n")
        for row in self.values[:, :, class_index]:
            writer.writerow([repr(float(value)) for value in row])
        return buffer.getvalue()


def assemble_density_map(contribs: ContributionMap) -> List[DensityMap]:
    """Reshape tile-indexed contributions onto the (row, col) focus grid, per image"""
    grid = contribs.grid
    shaped = contribs.values.reshape(contribs.n_batch, grid.rows, grid.cols, contribs.n_classes)
    return [
        DensityMap(values=shaped[index], focus=grid.focus, class_names=contribs.class_names)
        for index in range(contribs.n_batch)
    ]


def region_sum(density: DensityMap, rect: GridRect) -> np.ndarray:
    """Per-class sum of the cells inside a focus-grid rectangle"""
    if not rect.within(density.rows, density.cols):
        raise RegionError("Region outside the focus grid",
                          {"region": rect.to_dict(), "rows": density.rows,
                           "cols": density.cols})
    if rect.is_empty:
        return np.zeros(density.n_classes, dtype=density.values.dtype)
    cells = density.values[rect.row:rect.row + rect.height, rect.col:rect.col + rect.width]
    return canonical_sum(cells.reshape(-1, density.n_classes), axis=0)


def region_report(density: DensityMap, rects: Sequence[GridRect]) -> List[Dict[str, Any]]:
    """Region sums with rounding and, where an expected count is given, a verdict"""
    names = density.names()
    report = []
    for rect in rects:
        sums = region_sum(density, rect)
        entry: Dict[str, Any] = {
            "region": rect.to_dict(),
            "sums": {name: float(value) for name, value in zip(names, sums)},
            "rounded": {name: int(np.rint(value)) for name, value in zip(names, sums)},
        }
        if rect.expected is not None:
            if len(rect.expected) != len(names):
                raise RegionError("Expected counts must list every class",
                                  {"region": rect.name, "classes": list(names)})
            entry["correct"] = {
                name: bool(abs(float(value) - expected) < 0.5)
                for name, value, expected in zip(names, sums, rect.expected)
            }
        report.append(entry)
    return report
