"""
Label-Preserving Augmentation
Quarter-turn rotations and bicubic downscaling with top-left zero padding
"""
from typing import Optional, Sequence, Tuple

import numpy as np

from ednn.datagen.imaging import bicubic_resize
from ednn.shared.models.errors import AugmentationError
from ednn.shared.models.training import AugmentationKind


def augment_rotate90(image: np.ndarray, rng: np.random.Generator,
                     k: Optional[int] = None) -> np.ndarray:
    """Rotate counter-clockwise by k quarter turns, k uniform in {0, 1, 2, 3} unless given"""
    array = np.asarray(image)
    if array.shape[0] != array.shape[1]:
        raise AugmentationError("Rotation needs a square canvas",
                                {"height": array.shape[0], "width": array.shape[1]})
    turns = int(rng.integers(4)) if k is None else int(k) % 4
    return np.ascontiguousarray(np.rot90(array, turns, axes=(0, 1)))


def augment_downscale(image: np.ndarray, rng: np.random.Generator,
                      scale: Optional[float] = None,
                      scale_range: Tuple[float, float] = (0.5, 1.0)) -> np.ndarray:
    """Shrink by s (uniform in scale_range unless given) and zero-pad back to the original size"""
    array = np.asarray(image)
    factor = float(rng.uniform(*scale_range)) if scale is None else float(scale)
    if not 0 < factor <= 1:
        raise AugmentationError("Downscale factor must lie in (0, 1]", {"scale": factor})
    if factor == 1.0:
        return array.copy()

    height, width = array.shape[:2]
    small_h = max(1, int(round(height * factor)))
    small_w = max(1, int(round(width * factor)))
    out = np.zeros_like(array)
    out[:small_h, :small_w] = bicubic_resize(array, small_h, small_w)
    return out


def apply_augmentations(image: np.ndarray, kinds: Sequence[AugmentationKind],
                        rng: np.random.Generator,
                        scale_range: Tuple[float, float] = (0.5, 1.0)) -> np.ndarray:
    """Rotation first, then downscaling, whichever are enabled"""
    if AugmentationKind.ROTATE90 in kinds:
        image = augment_rotate90(image, rng)
    if AugmentationKind.DOWNSCALE in kinds:
        image = augment_downscale(image, rng, scale_range=scale_range)
    return image
