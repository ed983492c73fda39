"""Config I/O: load training configuration and write YAML artifacts."""

import os
from pathlib import Path
from typing import Any

import yaml
from dotenv import load_dotenv
from pydantic import BaseModel, ValidationError

from src.core.errors import ConfigError
from src.core.schemas import TrainConfig

# The only setting an environment variable may override
OUTPUT_DIR_ENV = "HCGMNET_OUTPUT_DIR"


def load_train_config(path: str | Path, apply_env: bool = True) -> TrainConfig:
    """Load and validate a flat YAML training configuration.

    Args:
        path: Path to the config file (one ``key: value`` per line)
        apply_env: Whether HCGMNET_OUTPUT_DIR may replace ``output_dir``

    Returns:
        Validated TrainConfig object

    Raises:
        FileNotFoundError: If the config file doesn't exist
        yaml.YAMLError: If YAML is invalid
        ConfigError: If the file is empty, keys are unknown or nested, or values are invalid
    """
    config_path = Path(path)
    if not config_path.exists():
        raise FileNotFoundError(f"Config file not found: {path}")

    with config_path.open(encoding="utf-8") as f:
        data = yaml.safe_load(f)

    if data is None:
        raise ConfigError(f"Config file is empty: {path}")
    if not isinstance(data, dict):
        raise ConfigError(f"Config must be a flat key/value mapping: {path}")

    nested = [key for key, value in data.items() if isinstance(value, dict)]
    if nested:
        raise ConfigError(f"Config must be flat, nested keys found: {nested}")

    if apply_env:
        data = apply_env_override(data)

    try:
        return TrainConfig(**data)
    except ValidationError as e:
        raise ConfigError(f"Invalid config {path}:\n{e}") from e


def apply_env_override(data: dict[str, Any]) -> dict[str, Any]:
    """Replace ``output_dir`` from the environment (or a .env file) if set."""
    load_dotenv()
    override = os.environ.get(OUTPUT_DIR_ENV)
    if not override:
        return data
    return {**data, "output_dir": override}


def write_yaml(path: str | Path, model: BaseModel) -> None:
    """Serialize a pydantic model to YAML, creating parent directories."""
    out = Path(path)
    out.parent.mkdir(parents=True, exist_ok=True)
    with out.open("w", encoding="utf-8") as f:
        yaml.safe_dump(model.model_dump(mode="json"), f, sort_keys=False)


def read_yaml(path: str | Path, model_type: type[BaseModel]) -> BaseModel:
    """Read a YAML file back into the given pydantic model."""
    in_path = Path(path)
    if not in_path.exists():
        raise FileNotFoundError(f"File not found: {in_path}")
    with in_path.open(encoding="utf-8") as f:
        return model_type(**yaml.safe_load(f))
