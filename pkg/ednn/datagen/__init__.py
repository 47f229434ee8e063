"""Counting dataset generation: MNIST collages, procedural shapes, IDX ingestion."""
from ednn.datagen.collage import compose_collage, image_rng, prepare_glyph, sample_label
from ednn.datagen.dataset import (
    LABELS_FILE,
    LEDGER_FILE,
    LabeledDataset,
    generate_dataset,
    generate_shapes,
    load_dataset,
    read_labels,
)
from ednn.datagen.idx import DigitPool, load_idx, read_idx_images, read_idx_labels
from ednn.datagen.imaging import bicubic_resize, read_image, write_png
from ednn.datagen.shapes import compose_shapes

__all__ = [
    "DigitPool",
    "LABELS_FILE",
    "LEDGER_FILE",
    "LabeledDataset",
    "bicubic_resize",
    "compose_collage",
    "compose_shapes",
    "generate_dataset",
    "generate_shapes",
    "image_rng",
    "load_dataset",
    "load_idx",
    "prepare_glyph",
    "read_idx_images",
    "read_idx_labels",
    "read_image",
    "read_labels",
    "sample_label",
    "write_png",
]
