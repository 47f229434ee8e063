"""
Integration tests for the generate -> train -> evaluate pipeline
Small canvases and few epochs; checks wiring and file contracts, not accuracy
"""
import numpy as np
import pytest

from ednn.datagen import compose_collage, generate_dataset, load_dataset
from ednn.datagen.dataset import LabeledDataset
from ednn.model import load_checkpoint, predict
from ednn.shared.models.dataset import CountLabel, DatasetSpec, DatasetVariant, Partition
from ednn.shared.models.network import EDNNConfig
from ednn.shared.models.training import AugmentationKind, StopReason, TrainConfig
from ednn.tiler import assemble_density_map
from ednn.trainer import evaluate, train


@pytest.fixture
def collage_dir(tmp_path, glyph_pool):
    spec = DatasetSpec(variant=DatasetVariant.MNIST_2, l_max=2, canvas=32, glyph_size=8,
                       train_count=12, test_count=4, seed=5)
    generate_dataset(spec, tmp_path / "mnist2", glyph_pool, threads=2)
    return tmp_path / "mnist2"


def small_model(channels: int = 1) -> EDNNConfig:
    return EDNNConfig(focus=4, context=2, channels=channels, classes=2, kernels=3,
                      dense_width=6)


class TestPipeline:
    """Library-level end to end"""

    def test_train_and_evaluate_collages(self, tmp_path, collage_dir):
        config = TrainConfig(dataset_dir=collage_dir, out=tmp_path / "m.ckpt",
                             model=small_model(), learning_rate=1e-3, max_epochs=3,
                             batch_size=4, checkpoint_every=1,
                             augment=(AugmentationKind.ROTATE90, AugmentationKind.DOWNSCALE))
        result = train(config)
        assert result.stop_reason in (StopReason.MAX_EPOCHS, StopReason.LOSS_THRESHOLD)
        assert all(np.isfinite(record.loss) for record in result.epochs)

        checkpoint = load_checkpoint(result.checkpoint)
        assert checkpoint.config.class_names == ("4", "8")
        assert checkpoint.epoch == len(result.epochs)

        report = evaluate(result.checkpoint, collage_dir)
        assert report.size == 4
        assert all(0.0 <= value <= 1.0 for value in report.accuracy.values())
        for histogram in report.histograms.values():
            assert histogram.mass() == 4

    def test_density_maps_sum_to_counts(self, tmp_path, collage_dir):
        config = TrainConfig(dataset_dir=collage_dir, out=tmp_path / "m.ckpt",
                             model=small_model(), max_epochs=1, batch_size=6)
        checkpoint = load_checkpoint(train(config).checkpoint)
        test = load_dataset(collage_dir, Partition.TEST, channels=1)
        counts, contribs = predict(list(test.images), checkpoint.params, checkpoint.config)
        for index, density in enumerate(assemble_density_map(contribs)):
            assert density.values.shape == (8, 8, 2)
            np.testing.assert_array_equal(density.total(), counts[index])

    def test_shapes_pipeline(self, tmp_path):
        spec = DatasetSpec(variant=DatasetVariant.SHAPES_2, l_max=2, canvas=32,
                           train_count=4, test_count=2, seed=1)
        generate_dataset(spec, tmp_path / "shapes")
        config = TrainConfig(dataset_dir=tmp_path / "shapes", out=tmp_path / "s.ckpt",
                             model=small_model(channels=3), max_epochs=2, batch_size=2)
        result = train(config)
        assert load_checkpoint(result.checkpoint).config.class_names == ("disc", "triangle")
        assert evaluate(result.checkpoint, tmp_path / "shapes").size == 2


class TestSmokeTraining:
    """Early epochs on a two-image collage set"""

    @pytest.fixture
    def two_images(self, glyph_pool) -> LabeledDataset:
        spec = DatasetSpec(variant=DatasetVariant.MNIST_2, l_max=2, canvas=32, glyph_size=8)
        labels = [{"4": 2, "8": 1}, {"4": 1, "8": 2}]
        images = [compose_collage(spec, CountLabel(counts), glyph_pool,
                                  np.random.default_rng(index)).pixels
                  for index, counts in enumerate(labels)]
        return LabeledDataset(files=["train/00000.png", "train/00001.png"],
                              images=np.stack(images)[..., None],
                              labels=np.array([[2.0, 1.0], [1.0, 2.0]]),
                              classes=("4", "8"), spec={"l_max": 2})

    def test_loss_falls_over_first_ten_epochs(self, tmp_path, two_images):
        """One full-batch step per epoch; at least 8 of 10 seeds decrease every epoch"""
        decreasing = 0
        for seed in range(10):
            config = TrainConfig(dataset_dir=tmp_path, out=tmp_path / f"s{seed}.ckpt",
                                 model=small_model(), learning_rate=1e-4, batch_size=2,
                                 min_epochs=10, max_epochs=10, loss_threshold=1e-9,
                                 seed=seed)
            losses = [record.loss for record in train(config, two_images).epochs]
            assert len(losses) == 10
            decreasing += all(later < earlier for earlier, later in zip(losses, losses[1:]))
        assert decreasing >= 8
