"""
Focus Grid Model
Geometry of the non-overlapping focus regions and rectangles on that grid
"""
from dataclasses import dataclass
from typing import Any, Dict, Optional, Tuple

from ednn.shared.models.errors import TilingError


@dataclass(frozen=True)
class TileGrid:
    """Focus grid laid over an image whose extents are multiples of the focus size"""

    focus: int
    context: int
    height: int
    width: int

    def __post_init__(self):
        if self.focus < 1 or self.context < 0:
            raise TilingError("Focus must be >= 1 and context >= 0",
                              {"focus": self.focus, "context": self.context})
        if self.height % self.focus or self.width % self.focus:
            raise TilingError(
                "Image extents must be multiples of the focus size",
                {"height": self.height, "width": self.width, "focus": self.focus},
            )

    @property
    def rows(self) -> int:
        return self.height // self.focus

    @property
    def cols(self) -> int:
        return self.width // self.focus

    @property
    def n_tiles(self) -> int:
        return self.rows * self.cols

    @property
    def tile_size(self) -> int:
        return self.focus + 2 * self.context

    def tile_index(self, row: int, col: int) -> int:
        """Row-major tile index of focus cell (row, col)"""
        return row * self.cols + col

    def cell(self, index: int) -> Tuple[int, int]:
        return divmod(index, self.cols)

    def focus_rect(self, row: int, col: int) -> Tuple[int, int, int, int]:
        """Pixel rectangle (top, left, bottom, right) of a focus region"""
        top, left = row * self.focus, col * self.focus
        return top, left, top + self.focus, left + self.focus

    def to_dict(self) -> Dict[str, Any]:
        return {"focus": self.focus, "context": self.context, "height": self.height,
                "width": self.width, "rows": self.rows, "cols": self.cols}


@dataclass(frozen=True)
class GridRect:
    """Rectangle in focus-grid units; an optional expected count per class"""

    row: int
    col: int
    height: int
    width: int
    name: str = ""
    expected: Optional[Tuple[int, ...]] = None

    @property
    def is_empty(self) -> bool:
        return self.height == 0 or self.width == 0

    def within(self, rows: int, cols: int) -> bool:
        return (self.row >= 0 and self.col >= 0 and self.height >= 0 and self.width >= 0
                and self.row + self.height <= rows and self.col + self.width <= cols)

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "GridRect":
        expected = data.get("expected")
        return cls(
            row=int(data["row"]),
            col=int(data["col"]),
            height=int(data["height"]),
            width=int(data["width"]),
            name=str(data.get("name", "")),
            expected=tuple(int(value) for value in expected) if expected is not None else None,
        )

    def to_dict(self) -> Dict[str, Any]:
        return {"name": self.name, "row": self.row, "col": self.col,
                "height": self.height, "width": self.width,
                "expected": list(self.expected) if self.expected is not None else None}
