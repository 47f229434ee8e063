"""
Contract tests for the extensive network
Architecture formula, shared per-tile forward pass, summed counts and the training step
"""
import numpy as np
import pytest

from ednn.model import (
    EDNNModel,
    build,
    forward_tiles,
    parameter_shapes,
    predict,
    training_step,
)
from ednn.model.network import batch_loss, frozen, normalize_pixels, prepare_batch
from ednn.shared.models.errors import ChannelMismatchError, ConfigError, ShapeError
from ednn.shared.models.network import EDNNConfig, Precision
from ednn.tensor_math import Adam, Tensor, backward, canonical_sum, conv2d, dense, relu
from ednn.tiler import extract_tiles
from tests.helpers import FD_EPSILON, constant_params, relative_error


def interior_image(size: int, margin: int, seed: int) -> np.ndarray:
    image = np.zeros((size, size), dtype=np.uint8)
    rng = np.random.default_rng(seed)
    image[margin:size - margin, margin:size - margin] = rng.integers(
        0, 256, size=(size - 2 * margin, size - 2 * margin))
    return image


class TestArchitecture:
    """Layer-count formula and parameter shapes"""

    def test_mnist_tile(self):
        """f=8, c=8: three conv layers, 24 -> 12 -> 6 -> 3, flatten 576"""
        config = EDNNConfig(focus=8, context=8, classes=1)
        assert config.n_conv_layers == 3
        assert config.spatial_chain() == [24, 12, 6, 3]
        shapes = parameter_shapes(config)
        assert shapes["conv2.kernel"] == (4, 4, 64, 64)
        assert shapes["dense.weight"] == (576, 1024)
        assert shapes["head.weight"] == (1024, 1)

    def test_larger_context(self):
        """f=8, c=12: four conv layers, 32 -> 16 -> 8 -> 4 -> 2, flatten 256"""
        config = EDNNConfig(focus=8, context=12, classes=2)
        assert config.n_conv_layers == 4
        assert config.spatial_chain() == [32, 16, 8, 4, 2]
        assert parameter_shapes(config)["dense.weight"] == (256, 1024)

    @pytest.mark.parametrize("focus,context", [(1, 0), (2, 0), (3, 0)])
    def test_tile_too_small(self, focus, context):
        with pytest.raises(ConfigError):
            build(EDNNConfig(focus=focus, context=context))

    def test_build_is_deterministic(self, tiny_config):
        first, second = build(tiny_config, seed=7), build(tiny_config, seed=7)
        for name in first:
            np.testing.assert_array_equal(first[name].data, second[name].data)
        assert not np.array_equal(build(tiny_config, seed=8)["dense.weight"].data,
                                  first["dense.weight"].data)

    def test_biases_start_at_zero(self, tiny_config):
        params = build(tiny_config)
        assert all(np.all(params[name].data == 0) for name in params if name.endswith(".bias"))


class TestForwardTiles:
    """The same weights on every tile"""

    def test_duplicate_tiles_identical_rows(self, tiny_config):
        rng = np.random.default_rng(0)
        tile = rng.integers(0, 256, size=(1, 4, 4, 1))
        out = forward_tiles(np.concatenate([tile, tile]), build(tiny_config, 1), tiny_config)
        np.testing.assert_array_equal(out.data[0], out.data[1])

    def test_zero_tile_gives_head_bias(self, tiny_config):
        params = build(tiny_config, 2)
        params["head.weight"].data[:] = 0
        params["head.bias"].data[:] = [0.5, -0.25]
        out = forward_tiles(np.zeros((3, 4, 4, 1)), params, tiny_config)
        np.testing.assert_array_equal(out.data, np.tile([0.5, -0.25], (3, 1)))

    def test_matches_layer_by_layer_composition(self):
        config = EDNNConfig(focus=4, context=2, classes=2, kernels=3, dense_width=5)
        params = build(config, seed=3, precision=Precision.F64)
        tile = np.random.default_rng(4).integers(0, 256, size=(1, 8, 8, 1))

        x = Tensor(tile / 255.0, dtype=np.float64)
        for layer in range(config.n_conv_layers):
            x = relu(conv2d(x, params[f"conv{layer}.kernel"], params[f"conv{layer}.bias"]))
        flat = Tensor(x.data.reshape(1, -1), dtype=np.float64)
        hidden = relu(dense(flat, params["dense.weight"], params["dense.bias"]))
        expected = dense(hidden, params["head.weight"], params["head.bias"]).data

        np.testing.assert_allclose(forward_tiles(tile, params, config).data, expected,
                                   rtol=1e-12)

    def test_tile_size_mismatch(self, tiny_config):
        with pytest.raises(ShapeError):
            forward_tiles(np.zeros((1, 6, 6, 1)), build(tiny_config), tiny_config)

    def test_negative_contributions_are_not_clamped(self, tiny_config):
        params = constant_params(tiny_config, -0.75)
        counts, contribs = predict([np.zeros((4, 4), dtype=np.uint8)], params, tiny_config)
        assert np.all(contribs.values == -0.75)
        assert np.all(counts == -3.0)


class TestPredict:
    """Counts are the sum of tile contributions"""

    def test_zero_weights_count_tiles_times_bias(self, tiny_config):
        params = constant_params(tiny_config, 0.125)
        counts, contribs = predict([np.zeros((8, 8), dtype=np.uint8)], params, tiny_config)
        assert contribs.grid.n_tiles == 16
        np.testing.assert_array_equal(counts, [[2.0, 2.0]])

    def test_uniform_contributions_count_one(self, tiny_config):
        params = constant_params(tiny_config, 1 / 16)
        counts, _ = predict([np.full((8, 8), 40, dtype=np.uint8)], params, tiny_config)
        assert counts[0, 0] == 1.0

    def test_counts_equal_resummed_contributions(self, tiny_config):
        rng = np.random.default_rng(5)
        images = [rng.integers(0, 256, size=(10, 6), dtype=np.uint8) for _ in range(3)]
        counts, contribs = predict(images, build(tiny_config, 5), tiny_config)
        np.testing.assert_array_equal(counts, canonical_sum(contribs.values, axis=1))

    def test_chunked_and_threaded_agree(self, tiny_config):
        rng = np.random.default_rng(6)
        images = [rng.integers(0, 256, size=(8, 8), dtype=np.uint8) for _ in range(5)]
        params = build(tiny_config, 6)
        whole, _ = predict(images, params, tiny_config)
        chunked, _ = predict(images, params, tiny_config, chunk_size=2, threads=3)
        sequential, _ = predict(images, params, tiny_config, chunk_size=2, threads=1)
        np.testing.assert_allclose(chunked, whole, rtol=1e-6, atol=1e-6)
        np.testing.assert_array_equal(chunked, sequential)

    def test_channel_mismatch(self, tiny_config):
        with pytest.raises(ChannelMismatchError):
            predict([np.zeros((8, 8, 3), dtype=np.uint8)], build(tiny_config), tiny_config)

    def test_arbitrary_size_is_padded_not_resized(self, tiny_config):
        counts, contribs = predict([np.zeros((7, 9), dtype=np.uint8)],
                                   constant_params(tiny_config, 1.0), tiny_config)
        assert (contribs.grid.height, contribs.grid.width) == (8, 10)
        assert counts[0, 0] == 20.0

    def test_full_hd_tile_count(self):
        """1920x1080 at f=8 evaluates 32400 tiles"""
        config = EDNNConfig(focus=8, context=0, kernels=1, dense_width=1)
        batch = prepare_batch([np.zeros((1080, 1920), dtype=np.uint8)], config)
        assert extract_tiles(batch, 8, 0).n_tiles == 32400

    @pytest.mark.parametrize("seed", range(50))
    def test_shift_of_interior_content(self, tiny_config, seed):
        """Translating interior content by whole focus cells leaves the count bitwise unchanged"""
        params = build(tiny_config, 9)
        rng = np.random.default_rng(seed)
        focus, size = tiny_config.focus, 32
        border = focus + 2 * tiny_config.context
        height, width = (int(side) for side in rng.integers(1, 13, size=2))
        content = rng.integers(1, 256, size=(height, width), dtype=np.uint8)

        def placements(extent: int):
            start = int(rng.integers(border, size - border - extent + 1))
            moved = [p for p in range(border, size - border - extent + 1)
                     if (p - start) % focus == 0]
            return start, int(rng.choice(moved))

        (row, new_row), (col, new_col) = placements(height), placements(width)
        first = np.zeros((size, size), dtype=np.uint8)
        second = np.zeros((size, size), dtype=np.uint8)
        first[row:row + height, col:col + width] = content
        second[new_row:new_row + height, new_col:new_col + width] = content
        before, _ = predict([first], params, tiny_config)
        after, _ = predict([second], params, tiny_config)
        np.testing.assert_array_equal(before, after)

    def test_extensive_over_quadrants(self, tiny_config):
        """Four images placed corner to corner predict the sum of their counts"""
        params = build(tiny_config, 10)
        quads = [interior_image(16, 4, seed) for seed in range(4)]
        canvas = np.block([[quads[0], quads[1]], [quads[2], quads[3]]])
        separate, _ = predict(quads, params, tiny_config)
        combined, _ = predict([canvas], params, tiny_config)
        np.testing.assert_allclose(combined[0], separate.sum(axis=0), atol=1e-4)


class TestTrainingStep:
    """One Adam step on the summed-count MSE"""

    def test_labels_equal_predictions(self, tiny_config):
        params = constant_params(tiny_config, 0.25)
        before = {name: tensor.data.copy() for name, tensor in params.items()}
        step = training_step([np.zeros((4, 4), dtype=np.uint8)], np.array([[1.0, 1.0]]),
                             params, Adam(), tiny_config)
        assert step.pre_step_loss == 0.0
        assert step.loss == 0.0
        for name, tensor in params.items():
            np.testing.assert_array_equal(tensor.data, before[name])
        assert params.adam.t == 1

    def test_half_count_error(self):
        """Prediction 2.5 against label 2 gives loss 0.25"""
        config = EDNNConfig(focus=2, context=1, classes=1, kernels=2, kernel_size=2,
                            dense_width=3)
        params = constant_params(config, 0.625)
        step = training_step([np.zeros((4, 4), dtype=np.uint8)], np.array([[2.0]]),
                             params, Adam(), config, measure_after=False)
        assert step.pre_step_loss == 0.25
        assert step.post_step_loss is None

    def test_rejects_bad_labels(self, tiny_config):
        params = build(tiny_config)
        image = [np.zeros((4, 4), dtype=np.uint8)]
        with pytest.raises(ShapeError):
            training_step(image, np.array([[1.0]]), params, Adam(), tiny_config)
        with pytest.raises(ShapeError):
            training_step(image, np.array([[1.0, -1.0]]), params, Adam(), tiny_config)

    def test_loss_decreases_on_repeated_steps(self, tiny_config):
        params = build(tiny_config, 11)
        images = [interior_image(8, 2, 11)]
        optimizer = Adam(lr=1e-2)
        first = training_step(images, np.array([[3.0, 1.0]]), params, optimizer, tiny_config)
        for _ in range(30):
            last = training_step(images, np.array([[3.0, 1.0]]), params, optimizer, tiny_config)
        assert last.loss < first.pre_step_loss

    @pytest.mark.parametrize("seed", range(20))
    def test_parameter_gradients_match_finite_differences(self, tiny_config, seed):
        """
        64-bit, tiny config f=2, c=1
        Between ReLU kinks the loss is quadratic in each parameter, so the central
        difference is exact there; a quotient that moves when eps is halved marks a
        step straddling a kink and is left out
        """
        params = build(tiny_config, seed, Precision.F64)
        for name in params:
            if name.endswith(".bias"):
                params[name].data[:] = np.random.default_rng(seed).normal(0, 0.1,
                                                                          params[name].shape)
        rng = np.random.default_rng(50 + seed)
        batch = prepare_batch([rng.integers(0, 256, size=(8, 8), dtype=np.uint8)
                               for _ in range(2)], tiny_config)
        labels = rng.integers(0, 4, size=(2, 2)).astype(np.float64)

        def central(tensor, index, step):
            original = tensor.data[index]
            tensor.data[index] = original + step
            plus = batch_loss(batch, labels, frozen(params), tiny_config).item()
            tensor.data[index] = original - step
            minus = batch_loss(batch, labels, frozen(params), tiny_config).item()
            tensor.data[index] = original
            return (plus - minus) / (2 * step)

        analytic = backward(batch_loss(batch, labels, params, tiny_config), params)
        straddled = 0
        for name, tensor in params.items():
            numeric = np.zeros_like(tensor.data)
            smooth = np.ones(tensor.shape, dtype=bool)
            for index in np.ndindex(tensor.shape):
                numeric[index] = central(tensor, index, FD_EPSILON)
                smooth[index] = abs(numeric[index] - central(tensor, index, FD_EPSILON / 2)) < 1e-7
            straddled += int((~smooth).sum())
            assert relative_error(analytic[name][smooth], numeric[smooth]) < 1e-4, name
        assert straddled <= 2


class TestModelWrapper:
    def test_astype_and_describe(self, tiny_config):
        model = EDNNModel.build(tiny_config, seed=1)
        wide = model.astype(Precision.F64)
        assert wide.params.dtype == np.float64
        assert [entry["name"] for entry in model.describe()][:2] == ["conv0.kernel", "conv0.bias"]

    def test_normalize_pixels(self):
        values = normalize_pixels(np.array([0, 255], dtype=np.uint8), np.dtype(np.float32))
        assert values.dtype == np.float32 and values.tolist() == [0.0, 1.0]
