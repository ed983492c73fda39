"""Prepared-dataset manifests, normalization and the torch Dataset over them.

Layout of a prepared root::

    <root>/<split>/A/<id>.png
    <root>/<split>/B/<id>.png
    <root>/<split>/label/<id>.png
    <root>/<split>.txt            # optional manifest, one id per line
"""

from pathlib import Path
from typing import Iterable, List

import numpy as np
import torch
from torch.utils.data import Dataset

from src.core.errors import MissingSampleFileError, SplitNotFoundError
from src.core.raster_io import read_label, read_rgb
from src.core.schemas import DatasetManifest
from src.data.tiling import RawPair

# Statistics of the corpus the pretrained backbone was trained on
IMAGENET_MEAN = (0.485, 0.456, 0.406)
IMAGENET_STD = (0.229, 0.224, 0.225)


def normalize(tile: np.ndarray, dtype: torch.dtype = torch.float32) -> torch.Tensor:
    """Turn an H×W×3 uint8 tile into a standardized 3×H×W tensor.

    Values are clamped to [0, 255], divided by 255 and standardized per channel.
    """
    x = torch.as_tensor(np.asarray(tile), dtype=dtype).clamp(0, 255) / 255.0
    mean = torch.tensor(IMAGENET_MEAN, dtype=dtype).view(1, 1, 3)
    std = torch.tensor(IMAGENET_STD, dtype=dtype).view(1, 1, 3)
    return ((x - mean) / std).permute(2, 0, 1).contiguous()


def denormalize(tensor: torch.Tensor) -> torch.Tensor:
    """Inverse of normalize: 3×H×W tensor back to H×W×3 values in [0, 255]."""
    mean = torch.tensor(IMAGENET_MEAN, dtype=tensor.dtype).view(3, 1, 1)
    std = torch.tensor(IMAGENET_STD, dtype=tensor.dtype).view(3, 1, 1)
    return ((tensor * std + mean) * 255.0).permute(1, 2, 0)


def manifest_path(root: str | Path, split: str) -> Path:
    return Path(root) / f"{split}.txt"


def load_manifest(root: str | Path, split: str) -> DatasetManifest:
    """Load the sorted sample ids of a prepared split.

    Reads ``<root>/<split>.txt`` when present, otherwise scans ``A/``.

    Raises:
        SplitNotFoundError: If ``<root>/<split>`` doesn't exist
        MissingSampleFileError: If a sample lacks its A, B or label file
    """
    root = Path(root)
    split_dir = root / split
    if not split_dir.is_dir():
        raise SplitNotFoundError(str(root), split)

    listing = manifest_path(root, split)
    if listing.exists():
        ids = [line.strip() for line in listing.read_text(encoding="utf-8").splitlines()]
        ids = [i for i in ids if i]
    else:
        ids = [p.stem for p in (split_dir / "A").glob("*.png")]

    manifest = DatasetManifest(root=root, split=split, ids=sorted(set(ids)))
    for sample_id in manifest.ids:
        for path in manifest.sample_paths(sample_id):
            if not path.exists():
                raise MissingSampleFileError(sample_id, str(path))
    return manifest


def write_manifest(manifest: DatasetManifest) -> Path:
    """Persist the ids of a split as ``<root>/<split>.txt``."""
    out = manifest_path(manifest.root, manifest.split)
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text("".join(f"{i}\n" for i in manifest.ids), encoding="utf-8")
    return out


def check_disjoint(manifests: Iterable[DatasetManifest]) -> None:
    """Raise if any sample id appears in more than one split."""
    seen: dict[str, str] = {}
    for manifest in manifests:
        for sample_id in manifest.ids:
            if sample_id in seen and seen[sample_id] != manifest.split:
                raise ValueError(
                    f"Sample '{sample_id}' is in both '{seen[sample_id]}' and '{manifest.split}'"
                )
            seen[sample_id] = manifest.split


def read_pair(manifest: DatasetManifest, sample_id: str) -> RawPair:
    path_a, path_b, path_label = manifest.sample_paths(sample_id)
    return RawPair(
        image_a=read_rgb(path_a),
        image_b=read_rgb(path_b),
        label=read_label(path_label),
        id=sample_id,
    )


def _augment(arrays: List[np.ndarray], rng: np.random.Generator) -> List[np.ndarray]:
    """Apply one random flip/rot90 identically to every raster."""
    k = int(rng.integers(0, 4))
    flip = bool(rng.integers(0, 2))
    out = []
    for a in arrays:
        a = np.rot90(a, k, axes=(0, 1))
        if flip:
            a = a[:, ::-1]
        out.append(np.ascontiguousarray(a))
    return out


class ChangeDetectionDataset(Dataset):
    """Serves normalized samples of one split.

    Each item is a dict with ``image_a``/``image_b`` (3×H×W float tensors),
    ``label`` (H×W float tensor of {0, 1}) and ``id``.
    """

    def __init__(self, manifest: DatasetManifest, augment: bool = False, seed: int = 0):
        self.manifest = manifest
        self.augment = augment
        self.seed = seed
        self.epoch = 0

    def __len__(self) -> int:
        return self.manifest.count

    def set_epoch(self, epoch: int) -> None:
        self.epoch = epoch

    def __getitem__(self, index: int) -> dict:
        sample_id = self.manifest.ids[index]
        pair = read_pair(self.manifest, sample_id)
        a, b, label = pair.image_a, pair.image_b, pair.label
        if self.augment:
            rng = np.random.default_rng((self.seed, self.epoch, index))
            a, b, label = _augment([a, b, label], rng)
        return {
            "image_a": normalize(a),
            "image_b": normalize(b),
            "label": torch.from_numpy(label.astype(np.float32)),
            "id": sample_id,
        }
