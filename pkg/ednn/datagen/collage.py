"""
Digit Collage Generator
Random count labels and summed, clipped compositions of MNIST glyphs on an empty canvas
"""
from typing import List, Optional, Tuple

import numpy as np

from ednn.datagen.idx import DigitPool
from ednn.datagen.imaging import bicubic_resize
from ednn.shared.models.dataset import (
    CountLabel,
    DatasetSpec,
    GeneratedImage,
    Partition,
    Placement,
)
from ednn.shared.models.errors import GenerationError

PARTITION_CODES = {Partition.TRAIN: 0, Partition.TEST: 1}


def image_rng(seed: int, partition: Partition, index: int) -> np.random.Generator:
    """Independent stream per (seed, partition, image index)"""
    return np.random.default_rng([seed, PARTITION_CODES[Partition(partition)], index])


def sample_label(spec: DatasetSpec, rng: np.random.Generator) -> CountLabel:
    """Independent uniform integer in [0, L_max] per class"""
    values = rng.integers(0, spec.l_max + 1, size=len(spec.classes))
    return CountLabel({name: int(value) for name, value in zip(spec.classes, values)})


def prepare_glyph(glyph: np.ndarray, spec: DatasetSpec,
                  rng: np.random.Generator) -> np.ndarray:
    """Resize to the spec's glyph size, then apply the variant's random isotropic scale"""
    side = spec.glyph_size
    if glyph.shape != (side, side):
        glyph = bicubic_resize(glyph, side, side)
    if spec.scale_range:
        scale = rng.uniform(*spec.scale_range)
        scaled = min(spec.canvas, max(1, int(round(side * scale))))
        glyph = bicubic_resize(glyph, scaled, scaled)
    return glyph


def _draw_anchor(rng: np.random.Generator, canvas: int,
                 height: int, width: int) -> Tuple[int, int]:
    top = int(rng.integers(0, canvas - height + 1))
    left = int(rng.integers(0, canvas - width + 1))
    return top, left


def _arrange(spec: DatasetSpec, glyphs: List[Tuple[str, int, np.ndarray]],
             partition: Partition, rng: np.random.Generator) -> Optional[List[Placement]]:
    """One placement attempt for every glyph; None when a glyph finds no free spot"""
    placements: List[Placement] = []
    for class_name, source_index, glyph in glyphs:
        height, width = glyph.shape
        for _ in range(spec.max_attempts):
            top, left = _draw_anchor(rng, spec.canvas, height, width)
            candidate = Placement(class_name, top, left, height, width,
                                  source_index, Partition(partition).value)
            if spec.occlusion or not any(candidate.intersects(p) for p in placements):
                placements.append(candidate)
                break
        else:
            return None
    return placements


def compose_collage(spec: DatasetSpec, label: CountLabel, pool: DigitPool,
                    rng: np.random.Generator,
                    partition: Partition = Partition.TRAIN) -> GeneratedImage:
    """Sum label-many glyphs per class into an empty canvas and clip at 255.

    Glyphs come from the partition's share of the pool. Non-occlusion variants
    resample every position up to max_restarts times before giving up.
    """
    label.validate(spec.l_max)
    glyphs: List[Tuple[str, int, np.ndarray]] = []
    for class_name in spec.classes:
        digit = int(class_name)
        indices = pool.indices(digit, partition)
        count = label.counts.get(class_name, 0)
        chosen = rng.choice(indices, size=count, replace=count > len(indices))
        for source_index in chosen:
            glyph = prepare_glyph(pool.glyph(digit, int(source_index)), spec, rng)
            glyphs.append((class_name, int(source_index), glyph))

    for _ in range(spec.max_restarts):
        placements = _arrange(spec, glyphs, partition, rng)
        if placements is not None:
            break
    else:
        raise GenerationError("Could not place every glyph without overlap",
                              {"variant": spec.variant.value, "counts": label.to_dict(),
                               "restarts": spec.max_restarts})

    canvas = np.zeros((spec.canvas, spec.canvas), dtype=np.int32)
    for placement, (_, _, glyph) in zip(placements, glyphs):
        top, left, bottom, right = placement.box()
        canvas[top:bottom, left:right] += glyph
    pixels = np.minimum(canvas, 255).astype(np.uint8)
    return GeneratedImage(pixels=pixels, label=label, placements=placements)
