"""
Procedural Shapes Generator
Anti-aliased RGB discs and triangles on gradient backgrounds, with partial overlap only
"""
from typing import List, Optional, Sequence, Tuple

import numpy as np
from PIL import Image, ImageDraw

from ednn.shared.models.dataset import (
    CountLabel,
    DatasetSpec,
    GeneratedImage,
    Partition,
    Placement,
)

Colour = Tuple[int, int, int]

SUPERSAMPLE = 4
BASE_SIZE_FRACTION = 0.16
SCALE_RANGE = (0.6, 1.4)
COLOUR_JITTER = 25
MAX_OVERLAP_FRACTION = 0.5

BACKGROUND_PALETTE: Sequence[Tuple[Colour, Colour]] = (
    ((28, 30, 58), (92, 96, 148)),
    ((40, 72, 42), (150, 188, 122)),
    ((206, 194, 172), (118, 98, 88)),
    ((22, 62, 92), (196, 218, 230)),
    ((70, 40, 30), (190, 150, 110)),
)
DISC_COLOURS: Sequence[Colour] = (
    (220, 60, 50), (240, 200, 40), (60, 120, 220), (80, 190, 90), (200, 90, 200),
)
TRIANGLE_COLOUR: Colour = (245, 205, 40)


def gradient_background(side: int, rng: np.random.Generator) -> np.ndarray:
    """Linear vertical or horizontal blend between a palette pair, as [side, side, 3] uint8"""
    start, stop = BACKGROUND_PALETTE[int(rng.integers(len(BACKGROUND_PALETTE)))]
    if rng.integers(2):
        start, stop = stop, start
    ramp = np.linspace(0.0, 1.0, side)[:, None]
    line = np.asarray(start, dtype=np.float64) + ramp * (np.subtract(stop, start))
    plane = np.broadcast_to(line[:, None, :], (side, side, 3))
    if rng.integers(2):
        plane = plane.transpose(1, 0, 2)
    return np.rint(plane).astype(np.uint8)


def _jitter(colour: Colour, rng: np.random.Generator) -> Colour:
    shifted = np.asarray(colour) + rng.integers(-COLOUR_JITTER, COLOUR_JITTER + 1, size=3)
    return tuple(int(v) for v in np.clip(shifted, 0, 255))


def _overlap_area(a: Placement, b: Placement) -> int:
    top, left, bottom, right = a.box()
    o_top, o_left, o_bottom, o_right = b.box()
    rows = max(0, min(bottom, o_bottom) - max(top, o_top))
    cols = max(0, min(right, o_right) - max(left, o_left))
    return rows * cols


def acceptable(candidate: Placement, placed: Sequence[Placement]) -> bool:
    """Partial overlap only: no containment either way, bounded shared area"""
    for other in placed:
        if candidate.contains(other) or other.contains(candidate):
            return False
        smaller = min(candidate.height * candidate.width, other.height * other.width)
        if _overlap_area(candidate, other) > MAX_OVERLAP_FRACTION * smaller:
            return False
    return True


def _triangle_points(placement: Placement, angle: float) -> List[Tuple[float, float]]:
    radius = SUPERSAMPLE * placement.width / 2.0
    centre_x = SUPERSAMPLE * placement.left + radius
    centre_y = SUPERSAMPLE * placement.top + radius
    return [(centre_x + radius * np.cos(angle + k * 2.0 * np.pi / 3.0),
             centre_y + radius * np.sin(angle + k * 2.0 * np.pi / 3.0)) for k in range(3)]


def _layout(spec: DatasetSpec, order: Sequence[str], partition: Partition,
            rng: np.random.Generator) -> Optional[List[Placement]]:
    base = BASE_SIZE_FRACTION * spec.canvas
    for _ in range(spec.max_restarts):
        placed: List[Placement] = []
        for class_name in order:
            for _ in range(spec.max_attempts):
                size = min(spec.canvas, max(4, int(round(base * rng.uniform(*SCALE_RANGE)))))
                top = int(rng.integers(0, spec.canvas - size + 1))
                left = int(rng.integers(0, spec.canvas - size + 1))
                candidate = Placement(class_name, top, left, size, size,
                                      partition=Partition(partition).value)
                if acceptable(candidate, placed):
                    placed.append(candidate)
                    break
            else:
                break
        else:
            return placed
    return None


def compose_shapes(spec: DatasetSpec, label: CountLabel, rng: np.random.Generator,
                   partition: Partition = Partition.TRAIN) -> Optional[GeneratedImage]:
    """Render one SHAPES image, or None when the label's objects cannot be packed"""
    label.validate(spec.l_max)
    order = [name for name in spec.classes for _ in range(label.counts.get(name, 0))]
    order = [order[i] for i in rng.permutation(len(order))]
    placements = _layout(spec, order, partition, rng)
    if placements is None:
        return None

    side = spec.canvas * SUPERSAMPLE
    image = Image.fromarray(gradient_background(side, rng))
    draw = ImageDraw.Draw(image)
    for placement in placements:
        if placement.class_name == "disc":
            colour = _jitter(DISC_COLOURS[int(rng.integers(len(DISC_COLOURS)))], rng)
            top, left, bottom, right = (SUPERSAMPLE * v for v in placement.box())
            draw.ellipse([left, top, right - 1, bottom - 1], fill=colour)
        else:
            colour = _jitter(TRIANGLE_COLOUR, rng)
            draw.polygon(_triangle_points(placement, rng.uniform(0.0, 2.0 * np.pi)),
                         fill=colour)
    small = image.resize((spec.canvas, spec.canvas), Image.Resampling.BOX)
    return GeneratedImage(pixels=np.asarray(small, dtype=np.uint8), label=label,
                          placements=placements)
