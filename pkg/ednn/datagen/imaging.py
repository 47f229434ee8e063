"""
Image I/O and Resampling
8-bit PNG reading/writing and bicubic resizing shared by generators and augmentation
"""
from pathlib import Path
from typing import Optional

import numpy as np
from PIL import Image, UnidentifiedImageError

from ednn.shared.models.errors import ChannelMismatchError, DatasetError, ImageReadError

_MODE_CHANNELS = {"L": 1, "RGB": 3}


def bicubic_resize(pixels: np.ndarray, height: int, width: int) -> np.ndarray:
    """Resize 8-bit pixels with bicubic interpolation (a = -0.5), clamped to [0, 255]"""
    array = np.asarray(pixels)
    if array.shape[:2] == (height, width):
        return array.copy()
    planes = array[:, :, None] if array.ndim == 2 else array
    resized = []
    for channel in range(planes.shape[2]):
        plane = Image.fromarray(planes[:, :, channel].astype(np.float32))
        plane = plane.resize((width, height), Image.Resampling.BICUBIC)
        resized.append(np.asarray(plane, dtype=np.float32))
    stacked = np.clip(np.rint(np.stack(resized, axis=2)), 0, 255).astype(np.uint8)
    return stacked[:, :, 0] if array.ndim == 2 else stacked


def write_png(pixels: np.ndarray, path: Path):
    """Save [H, W] grayscale or [H, W, 3] RGB uint8 pixels as PNG"""
    array = np.asarray(pixels, dtype=np.uint8)
    if array.ndim == 3 and array.shape[2] == 1:
        array = array[:, :, 0]
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        Image.fromarray(array).save(path, format="PNG")
    except OSError as exc:
        raise DatasetError("Cannot write image", {"path": str(path)}) from exc


def read_image(path: Path, channels: Optional[int] = None) -> np.ndarray:
    """Load an 8-bit grayscale or RGB image as [H, W, d] uint8"""
    try:
        with Image.open(path) as image:
            image.load()
            mode = image.mode
            if mode == "RGBA":
                image = image.convert("RGB")
            elif mode == "P":
                image = image.convert("RGBA" if "transparency" in image.info else "RGB")
                image = image.convert("RGB")
            elif mode == "LA":
                image = image.convert("L")
            if image.mode not in _MODE_CHANNELS:
                raise ImageReadError("Image is not 8-bit grayscale or RGB",
                                     {"path": str(path), "mode": mode})
            pixels = np.asarray(image, dtype=np.uint8)
    except (OSError, UnidentifiedImageError) as exc:
        raise ImageReadError("Cannot decode image", {"path": str(path)}) from exc

    if pixels.ndim == 2:
        pixels = pixels[:, :, None]
    if channels is not None and pixels.shape[2] != channels:
        raise ChannelMismatchError("Image channel count differs from the model",
                                   {"path": str(path), "channels": pixels.shape[2],
                                    "expected": channels})
    return pixels
