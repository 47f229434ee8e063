"""
Shared fixtures
Small configurations, synthetic digit pools and IDX files used across test suites
"""
import pytest
import structlog

from ednn.datagen.idx import DigitPool
from ednn.shared.models.network import EDNNConfig
from tests.helpers import synthetic_mnist, write_idx_images, write_idx_labels


@pytest.fixture
def glyph_pool() -> DigitPool:
    """20 glyphs per digit: 16 train, 4 test"""
    images, labels = synthetic_mnist(per_digit=20)
    return DigitPool.from_arrays(images, labels, per_digit=20, test_per_digit=4)


@pytest.fixture
def tiny_config() -> EDNNConfig:
    """f=2, c=1: one conv layer on 4x4 tiles"""
    return EDNNConfig(focus=2, context=1, channels=1, classes=2, kernels=2,
                      kernel_size=2, dense_width=3)


@pytest.fixture
def idx_files(tmp_path):
    images, labels = synthetic_mnist(per_digit=20)
    return (write_idx_images(tmp_path / "images.idx3", images),
            write_idx_labels(tmp_path / "labels.idx1", labels))


@pytest.fixture(autouse=True)
def reset_logging():
    """The CLI binds structlog to the captured stderr; undo it after every test"""
    yield
    structlog.reset_defaults()
