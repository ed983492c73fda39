"""Tests for training-config loading and validation."""

from pathlib import Path

import pytest
import yaml
from pydantic import ValidationError

from src.core.config_io import OUTPUT_DIR_ENV, load_train_config, read_yaml, write_yaml
from src.core.errors import ConfigError
from src.core.schemas import BackboneConfig, TrainConfig

CONFIG_DIR = Path(__file__).resolve().parent.parent / "data" / "configs"


def write_config(tmp_path: Path, text: str) -> Path:
    path = tmp_path / "config.yaml"
    path.write_text(text)
    return path


class TestLoadTrainConfig:
    """Test load_train_config."""

    def test_valid_config(self, tmp_path):
        path = write_config(tmp_path, "learning_rate: 0.001\nbatch_size: 4\npretrained: false\nwidth_divisor: 8\n")
        config = load_train_config(path)
        assert config.learning_rate == 0.001
        assert config.batch_size == 4
        assert config.backbone_config() == BackboneConfig(pretrained=False, width_divisor=8)

    def test_unknown_key(self, tmp_path):
        with pytest.raises(ConfigError) as exc:
            load_train_config(write_config(tmp_path, "learning_rate: 0.001\nwarmup: 5\n"))
        assert "warmup" in str(exc.value)

    def test_nested_key(self, tmp_path):
        with pytest.raises(ConfigError):
            load_train_config(write_config(tmp_path, "optimizer:\n  lr: 0.001\n"))

    def test_empty_file(self, tmp_path):
        with pytest.raises(ConfigError):
            load_train_config(write_config(tmp_path, ""))

    def test_not_a_mapping(self, tmp_path):
        with pytest.raises(ConfigError):
            load_train_config(write_config(tmp_path, "- 1\n- 2\n"))

    def test_invalid_yaml(self, tmp_path):
        with pytest.raises(yaml.YAMLError):
            load_train_config(write_config(tmp_path, "learning_rate: [0.001\n"))

    def test_missing_file(self, tmp_path):
        with pytest.raises(FileNotFoundError):
            load_train_config(tmp_path / "absent.yaml")

    def test_invalid_value(self, tmp_path):
        with pytest.raises(ConfigError):
            load_train_config(write_config(tmp_path, "tile_size: 250\n"))

    def test_env_overrides_output_dir_only(self, tmp_path, monkeypatch):
        path = write_config(tmp_path, "output_dir: runs/a\nlearning_rate: 0.001\n")
        monkeypatch.setenv(OUTPUT_DIR_ENV, str(tmp_path / "elsewhere"))
        config = load_train_config(path)
        assert config.output_dir == tmp_path / "elsewhere"
        assert config.learning_rate == 0.001
        assert load_train_config(path, apply_env=False).output_dir == Path("runs/a")

    @pytest.mark.parametrize("name", ["levir_cd.yaml", "whu_cd.yaml", "synthetic.yaml"])
    def test_shipped_configs_load(self, name):
        config = load_train_config(CONFIG_DIR / name, apply_env=False)
        assert config.tile_size % 16 == 0


class TestTrainConfig:
    """Test TrainConfig defaults and rules."""

    def test_defaults_follow_published_recipe(self):
        config = TrainConfig()
        assert config.learning_rate == 5e-4
        assert config.weight_decay == 0.0025
        assert config.batch_size == 8
        assert config.epochs == 50
        assert config.betas == (0.9, 0.999)
        assert config.threshold == 0.5
        assert config.tile_size == 256

    def test_pretrained_requires_full_width(self):
        with pytest.raises(ValidationError):
            TrainConfig(pretrained=True, width_divisor=8)
        assert TrainConfig(pretrained=False, width_divisor=8).width_divisor == 8

    @pytest.mark.parametrize("divisor", [3, 64])
    def test_unsupported_width_divisor(self, divisor):
        with pytest.raises(ValidationError):
            TrainConfig(pretrained=False, width_divisor=divisor)

    @pytest.mark.parametrize("threshold", [0.0, 1.0])
    def test_threshold_is_open_interval(self, threshold):
        with pytest.raises(ValidationError):
            TrainConfig(threshold=threshold)

    def test_yaml_round_trip(self, tmp_path):
        config = TrainConfig(pretrained=False, width_divisor=4, output_dir=tmp_path / "run")
        write_yaml(tmp_path / "snapshot.yaml", config)
        assert read_yaml(tmp_path / "snapshot.yaml", TrainConfig) == config
