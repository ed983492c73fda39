"""Shared fixtures: a tiny prepared synthetic dataset and a matching config."""

import pytest

from src.cli.cd_service import prepare_dataset
from src.core.config_io import OUTPUT_DIR_ENV
from src.core.schemas import TrainConfig
from src.core.seed import write_synthetic_dataset

TILE = 64


@pytest.fixture(autouse=True)
def no_output_override(monkeypatch):
    """Keep a developer's HCGMNET_OUTPUT_DIR out of the tests."""
    monkeypatch.delenv(OUTPUT_DIR_ENV, raising=False)


@pytest.fixture
def prepared_root(tmp_path):
    """8/2/2 synthetic 64×64 pairs, prepared as one tile each."""
    raw = tmp_path / "raw"
    write_synthetic_dataset(raw, {"train": 8, "val": 2, "test": 2}, TILE, TILE, seed=7)
    prepared = tmp_path / "prepared"
    prepare_dataset(raw, prepared, tile_size=TILE)
    return prepared


@pytest.fixture
def tiny_config(tmp_path, prepared_root):
    """Random-init, 1/32-width model that trains in seconds on CPU."""
    return TrainConfig(
        dataset_root=prepared_root,
        dataset_id="synthetic",
        output_dir=tmp_path / "run",
        pretrained=False,
        width_divisor=32,
        tile_size=TILE,
        epochs=1,
        batch_size=8,
        device="cpu",
    )
