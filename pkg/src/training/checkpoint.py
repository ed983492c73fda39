"""Checkpoint directories: params.pt, optimizer.pt and meta.yaml."""

import hashlib
from pathlib import Path
from typing import Mapping, Optional

import torch
from torch import nn

from src.core.config_io import read_yaml, write_yaml
from src.core.errors import CheckpointMismatchError
from src.core.schemas import CheckpointMeta
from src.models.hcgmnet import HCGMNet, build_model

PARAMS_FILE = "params.pt"
OPTIMIZER_FILE = "optimizer.pt"
META_FILE = "meta.yaml"


def params_digest(state: Mapping[str, torch.Tensor]) -> str:
    """sha256 over canonical names and tensor bytes, in name order."""
    h = hashlib.sha256()
    for name in sorted(state):
        tensor = state[name].detach().cpu().contiguous()
        h.update(name.encode("utf-8"))
        h.update(str(tensor.dtype).encode("utf-8"))
        h.update(tensor.numpy().tobytes())
    return h.hexdigest()


def save_checkpoint(
    directory: str | Path,
    model: nn.Module,
    meta: CheckpointMeta,
    optimizer: Optional[torch.optim.Optimizer] = None,
) -> Path:
    """Write a checkpoint directory, overwriting any previous content."""
    out = Path(directory)
    out.mkdir(parents=True, exist_ok=True)
    state = {k: v.detach().cpu() for k, v in model.state_dict().items()}
    torch.save(state, out / PARAMS_FILE)
    if optimizer is not None:
        torch.save(optimizer.state_dict(), out / OPTIMIZER_FILE)
    write_yaml(out / META_FILE, meta.model_copy(update={"params_digest": params_digest(state)}))
    return out


def read_meta(directory: str | Path) -> CheckpointMeta:
    return read_yaml(Path(directory) / META_FILE, CheckpointMeta)


def load_params(model: nn.Module, state: Mapping[str, torch.Tensor]) -> None:
    """Load a state dict, listing every name that does not line up.

    Raises:
        CheckpointMismatchError: If names are missing or unexpected
    """
    expected = set(model.state_dict())
    missing = sorted(expected - set(state))
    unexpected = sorted(set(state) - expected)
    if missing or unexpected:
        raise CheckpointMismatchError(missing, unexpected)
    model.load_state_dict(state)


def load_checkpoint(
    directory: str | Path, map_location: str | torch.device = "cpu"
) -> tuple[HCGMNet, CheckpointMeta]:
    """Rebuild the model from the config snapshot and load its parameters.

    The backbone is rebuilt without downloading weights; the payload supplies them.

    Raises:
        FileNotFoundError: If the directory or its files are missing
        CheckpointMismatchError: If parameter names disagree with the model
    """
    path = Path(directory)
    if not (path / PARAMS_FILE).exists():
        raise FileNotFoundError(f"Checkpoint not found: {path / PARAMS_FILE}")
    meta = read_meta(path)
    model = build_model(meta.config.model_copy(update={"pretrained": False}))
    state = torch.load(path / PARAMS_FILE, map_location=map_location, weights_only=True)
    load_params(model, state)
    return model, meta


def load_optimizer_state(directory: str | Path) -> Optional[dict]:
    path = Path(directory) / OPTIMIZER_FILE
    if not path.exists():
        return None
    return torch.load(path, map_location="cpu", weights_only=True)
