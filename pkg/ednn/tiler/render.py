"""
Density Map Rendering
CSV export and diverging heat overlays (positive red, negative blue) over the input image
"""
from pathlib import Path
from typing import Dict, List

import numpy as np
from matplotlib import colormaps
from PIL import Image

from ednn.shared.models.errors import DatasetError
from ednn.tiler.tiling import DensityMap, as_hwd

OVERLAY_ALPHA = 0.6


def render_overlay(image: np.ndarray, density: DensityMap, class_index: int,
                   alpha: float = OVERLAY_ALPHA) -> np.ndarray:
    """Blend a class's density map over the image as 8-bit RGB.

    Colour is centred at 0 and normalised by the largest |cell| of this class;
    blend weight grows with |cell| so empty regions keep the image visible.
    """
    heat = density.upsampled(class_index).astype(np.float64)
    height, width = heat.shape

    base = as_hwd(image).astype(np.float64) / 255.0
    if base.shape[2] == 1:
        base = np.repeat(base, 3, axis=2)
    canvas = np.zeros((height, width, 3), dtype=np.float64)
    rows, cols = min(height, base.shape[0]), min(width, base.shape[1])
    canvas[:rows, :cols] = base[:rows, :cols, :3]

    scale = float(np.max(np.abs(heat))) if heat.size else 0.0
    normalised = heat / scale if scale > 0 else np.zeros_like(heat)
    colours = colormaps["bwr"]((normalised + 1.0) / 2.0)[..., :3]
    weight = alpha * np.abs(normalised)[..., None]

    blended = canvas * (1.0 - weight) + colours * weight
    return np.clip(np.rint(blended * 255.0), 0, 255).astype(np.uint8)


def write_density_outputs(image: np.ndarray, density: DensityMap,
                          prefix: Path) -> List[Dict[str, str]]:
    """Write <prefix>_<class>.csv and <prefix>_<class>.png for every class"""
    prefix.parent.mkdir(parents=True, exist_ok=True)
    written = []
    for index, name in enumerate(density.names()):
        csv_path = prefix.parent / f"{prefix.name}_{name}.csv"
        png_path = prefix.parent / f"{prefix.name}_{name}.png"
        try:
            csv_path.write_text(density.to_csv(index), encoding="utf-8")
            Image.fromarray(render_overlay(image, density, index)).save(png_path)
        except OSError as exc:
            raise DatasetError("Cannot write density outputs",
                               {"path": str(csv_path.parent)}) from exc
        written.append({"class": name, "csv": str(csv_path), "overlay": str(png_path)})
    return written
