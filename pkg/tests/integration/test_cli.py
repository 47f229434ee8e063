"""
Integration tests for the ednn command line
Each command runs through main() and is judged on its JSON block and exit code
"""
import json

import numpy as np
import pytest
import yaml

from ednn.cli.main import EXIT_EDNN_ERROR, EXIT_OK, build_parser, main, resolve_settings
from ednn.datagen import write_png
from ednn.model import save_checkpoint
from ednn.shared.models.config import ConfigSource
from ednn.shared.models.network import EDNNConfig
from tests.helpers import constant_params

SETTINGS = {
    "dataset": {"variant": "MNIST-2", "canvas": 32, "glyph_size": 8, "l_max": 2,
                "train_count": 8, "test_count": 4, "per_digit": 20, "test_per_digit": 4},
    "model": {"focus": 4, "context": 2, "kernels": 2, "dense_width": 4},
}
MODEL = EDNNConfig(focus=4, context=2, classes=2, kernels=2, dense_width=4,
                   class_names=("4", "8"))


def run(capsys, *argv):
    code = main([str(arg) for arg in argv])
    captured = capsys.readouterr()
    stream = captured.out if code == EXIT_OK else captured.err
    return code, json.loads(stream)


@pytest.fixture
def config_file(tmp_path):
    path = tmp_path / "ednn.yaml"
    path.write_text(yaml.safe_dump(SETTINGS))
    return path


@pytest.fixture
def dataset_dir(tmp_path, capsys, config_file, idx_files):
    out = tmp_path / "ds"
    code, _ = run(capsys, "generate", "--config", config_file, "--dataset-dir", out,
                  "--mnist-images", idx_files[0], "--mnist-labels", idx_files[1], "--seed", 3)
    assert code == EXIT_OK
    return out


@pytest.fixture
def constant_checkpoint(tmp_path):
    """Zero weights, head bias 1/8: every 4x4 focus cell counts 0.125 per class"""
    return save_checkpoint(constant_params(MODEL, 0.125), MODEL, tmp_path / "constant.ckpt")


class TestGenerate:
    """ednn generate"""

    def test_writes_dataset(self, tmp_path, capsys, config_file, idx_files):
        out = tmp_path / "ds"
        code, payload = run(capsys, "generate", "--config", config_file, "--out", out,
                            "--mnist-images", idx_files[0], "--mnist-labels", idx_files[1])
        assert code == EXIT_OK
        result = payload["result"]
        assert result["train"] == 8 and result["test"] == 4
        assert result["pool"]["4"] == {"glyphs": 20, "train": 16, "test": 4}
        assert len(list(out.rglob("*.png"))) == 12
        assert payload["config"]["canvas"]["source"] == "file"

    def test_flag_overrides_file(self, tmp_path, capsys, config_file, idx_files):
        code, payload = run(capsys, "generate", "--config", config_file,
                            "--out", tmp_path / "ds", "--train-count", 2,
                            "--mnist-images", idx_files[0], "--mnist-labels", idx_files[1])
        assert code == EXIT_OK
        assert payload["result"]["train"] == 2
        assert payload["config"]["train_count"]["source"] == "cli"

    def test_missing_mnist_files(self, tmp_path, capsys, config_file):
        code, payload = run(capsys, "generate", "--config", config_file,
                            "--out", tmp_path / "ds")
        assert code == EXIT_EDNN_ERROR
        assert payload["error"]["context"]["flag"] == "--mnist-images"

    def test_shapes_need_no_mnist(self, tmp_path, capsys):
        code, payload = run(capsys, "generate", "--variant", "SHAPES-1", "--canvas", 32,
                            "--l-max", 2, "--train-count", 2, "--test-count", 1,
                            "--out", tmp_path / "shapes")
        assert code == EXIT_OK
        assert payload["result"]["variant"] == "SHAPES-1"


class TestTrainAndEval:
    """ednn train and ednn eval on a generated dataset"""

    def test_train_then_eval(self, tmp_path, capsys, config_file, dataset_dir):
        ckpt = tmp_path / "model.ckpt"
        code, payload = run(capsys, "train", "--config", config_file, "--dataset-dir",
                            dataset_dir, "--out", ckpt, "--epochs-max", 2, "--lr", 0.001)
        assert code == EXIT_OK
        assert 1 <= payload["result"]["epochs_run"] <= 2
        assert ckpt.is_file()

        code, payload = run(capsys, "eval", "--checkpoint", ckpt, "--dataset-dir", dataset_dir,
                            "--examples")
        assert code == EXIT_OK
        result = payload["result"]
        assert result["size"] == 4
        assert set(result["accuracy"]) == {"4", "8"}
        assert len(result["examples"]) == 4
        assert sum(result["histograms"]["4"]["counts"]) == 4

    def test_classes_must_match_dataset(self, tmp_path, capsys, config_file, dataset_dir):
        code, payload = run(capsys, "train", "--config", config_file, "--dataset-dir",
                            dataset_dir, "--out", tmp_path / "m.ckpt", "--classes", "5")
        assert code == EXIT_EDNN_ERROR
        assert payload["error"]["code"] == "invalid_config"

    def test_epoch_bounds_must_be_ordered(self, tmp_path, capsys, config_file, dataset_dir):
        code, payload = run(capsys, "train", "--config", config_file, "--dataset-dir",
                            dataset_dir, "--out", tmp_path / "m.ckpt",
                            "--epochs-min", 3, "--epochs-max", 2)
        assert code == EXIT_EDNN_ERROR
        assert payload["error"]["code"] == "invalid_config"
        assert not (tmp_path / "m.ckpt").exists()

    def test_eval_needs_checkpoint(self, capsys, dataset_dir):
        code, payload = run(capsys, "eval", "--dataset-dir", dataset_dir)
        assert code == EXIT_EDNN_ERROR
        assert payload["error"]["context"]["flag"] == "--checkpoint"


class TestCountAndLocalize:
    """ednn count and ednn localize on a single image"""

    @pytest.fixture
    def image(self, tmp_path):
        path = tmp_path / "blank.png"
        write_png(np.zeros((32, 32), dtype=np.uint8), path)
        return path

    def test_count(self, capsys, image, constant_checkpoint):
        code, payload = run(capsys, "count", image, "--checkpoint", constant_checkpoint)
        assert code == EXIT_OK
        result = payload["result"]
        assert result["tiles"] == 64
        assert result["counts"] == {"4": 8.0, "8": 8.0}
        assert result["rounded"] == {"4": 8, "8": 8}

    def test_region_sums_add_up(self, tmp_path, capsys, image, constant_checkpoint):
        regions = tmp_path / "regions.json"
        regions.write_text(json.dumps({"regions": [
            {"name": "left", "row": 0, "col": 0, "height": 8, "width": 4},
            {"name": "right", "row": 0, "col": 4, "height": 8, "width": 4},
            {"name": "corner", "row": 0, "col": 0, "height": 1, "width": 1, "expected": [0, 1]},
        ]}))
        code, payload = run(capsys, "count", image, "--checkpoint", constant_checkpoint,
                            "--regions", regions)
        assert code == EXIT_OK
        left, right, corner = payload["result"]["regions"]
        total = payload["result"]["counts"]
        for name in ("4", "8"):
            assert left["sums"][name] + right["sums"][name] == total[name]
        assert corner["sums"] == {"4": 0.125, "8": 0.125}
        assert corner["correct"] == {"4": True, "8": False}

    def test_region_out_of_bounds(self, tmp_path, capsys, image, constant_checkpoint):
        regions = tmp_path / "regions.json"
        regions.write_text(json.dumps([{"row": 6, "col": 0, "height": 4, "width": 1}]))
        code, payload = run(capsys, "count", image, "--checkpoint", constant_checkpoint,
                            "--regions", regions)
        assert code == EXIT_EDNN_ERROR
        assert payload["error"]["code"] == "region_out_of_bounds"

    def test_localize_writes_maps(self, tmp_path, capsys, image, constant_checkpoint):
        code, payload = run(capsys, "localize", image, "--checkpoint", constant_checkpoint,
                            "--out", tmp_path / "maps" / "blank")
        assert code == EXIT_OK
        outputs = payload["result"]["outputs"]
        assert [entry["class"] for entry in outputs] == ["4", "8"]
        rows = (tmp_path / "maps" / "blank_4.csv").read_text().strip().split("\n")
        assert len(rows) == 8
        assert all(float(v) == 0.125 for row in rows for v in row.split(","))

    def test_missing_checkpoint(self, tmp_path, capsys, image):
        code, payload = run(capsys, "count", image, "--checkpoint", tmp_path / "absent.ckpt")
        assert code == EXIT_EDNN_ERROR
        assert payload["error"]["code"] == "checkpoint_corrupt"

    def test_channel_mismatch(self, tmp_path, capsys, constant_checkpoint):
        path = tmp_path / "colour.png"
        write_png(np.zeros((32, 32, 3), dtype=np.uint8), path)
        code, payload = run(capsys, "count", path, "--checkpoint", constant_checkpoint)
        assert code == EXIT_EDNN_ERROR
        assert payload["error"]["code"] == "channel_mismatch"


class TestSettings:
    """defaults < file < environment < flags"""

    def test_environment_then_flags(self, tmp_path):
        parser = build_parser()
        args = parser.parse_args(["count", str(tmp_path / "x.png")])
        layers = resolve_settings(args, env={"EDNN_THREADS": "3"})
        assert layers.get("threads") == "3"
        assert layers.source_of("threads") == ConfigSource.ENVIRONMENT_VARIABLE

        args = parser.parse_args(["count", str(tmp_path / "x.png"), "--threads", "2"])
        layers = resolve_settings(args, env={"EDNN_THREADS": "3"})
        assert layers.get("threads") == 2
        assert layers.source_of("threads") == ConfigSource.COMMAND_LINE

    def test_defaults(self, tmp_path):
        args = build_parser().parse_args(["count", str(tmp_path / "x.png")])
        layers = resolve_settings(args, env={})
        assert layers.get("threads") == 1
        assert layers.source_of("log_level") == ConfigSource.DEFAULT
