"""Focus-region tiling and density-map assembly."""
from ednn.tiler.tiling import (
    ContributionMap,
    DensityMap,
    TileBatch,
    as_hwd,
    assemble_density_map,
    extract_tiles,
    pad_to_multiple,
    region_report,
    region_sum,
)

__all__ = [
    "ContributionMap",
    "DensityMap",
    "TileBatch",
    "as_hwd",
    "assemble_density_map",
    "extract_tiles",
    "pad_to_multiple",
    "region_report",
    "region_sum",
]
