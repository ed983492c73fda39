"""Pipeline operations behind the CLI: prepare, predict and error-map rendering."""

from pathlib import Path

import numpy as np
import torch

from src.core.errors import MissingSampleFileError, RasterShapeError
from src.core.raster_io import read_label, read_rgb, write_binary_map, write_png
from src.core.schemas import ConfusionMatrix, DatasetManifest, Split
from src.data.dataset import normalize, write_manifest
from src.data.tiling import RawPair, tile_pair
from src.models.backbone import check_spatial_size
from src.models.decoder import predict_binary
from src.training.checkpoint import load_checkpoint

RAW_SUBDIRS = ("A", "B", "label")

# Agreement classes of an error map
TP_COLOR = (255, 255, 255)  # white
FP_COLOR = (255, 0, 0)  # red
TN_COLOR = (0, 0, 0)  # black
FN_COLOR = (0, 0, 255)  # blue


def _read_raw_pair(split_dir: Path, sample_id: str) -> RawPair:
    paths = [split_dir / sub / f"{sample_id}.png" for sub in RAW_SUBDIRS]
    for path in paths:
        if not path.exists():
            raise MissingSampleFileError(sample_id, str(path))
    return RawPair(
        image_a=read_rgb(paths[0]),
        image_b=read_rgb(paths[1]),
        label=read_label(paths[2]),
        id=sample_id,
    )


def prepare_dataset(raw_root: str | Path, out_root: str | Path, tile_size: int = 256) -> dict[str, int]:
    """Tile every raw split into ``<out>/<split>/{A,B,label}`` plus manifests.

    Splits absent from the raw root are skipped. Labels are written as {0, 255}.

    Returns:
        Number of tiles per prepared split

    Raises:
        FileNotFoundError: If the raw root or a split's A/B/label folder is missing
        RasterShapeError: If a pair's rasters disagree in size
    """
    raw_root, out_root = Path(raw_root), Path(out_root)
    if not raw_root.is_dir():
        raise FileNotFoundError(f"Raw dataset root not found: {raw_root}")

    counts: dict[str, int] = {}
    for split in (s.value for s in Split):
        split_dir = raw_root / split
        if not split_dir.is_dir():
            continue
        for sub in RAW_SUBDIRS:
            if not (split_dir / sub).is_dir():
                raise FileNotFoundError(f"Malformed raw layout: {split_dir / sub} is missing")

        ids: list[str] = []
        for source in sorted(p.stem for p in (split_dir / "A").glob("*.png")):
            for tile in tile_pair(_read_raw_pair(split_dir, source), tile_size):
                tile_id = tile.origin.tile_id
                name = f"{tile_id}.png"
                write_png(out_root / split / "A" / name, tile.tile_a)
                write_png(out_root / split / "B" / name, tile.tile_b)
                write_binary_map(out_root / split / "label" / name, tile.tile_label)
                ids.append(tile_id)

        (out_root / split).mkdir(parents=True, exist_ok=True)
        write_manifest(DatasetManifest(root=out_root, split=split, ids=sorted(ids)))
        counts[split] = len(ids)
    return counts


@torch.no_grad()
def predict_pair(
    image_a: str | Path,
    image_b: str | Path,
    checkpoint: str | Path,
    out: str | Path,
    threshold: float | None = None,
) -> np.ndarray:
    """Predict the binary change map of one pair and write it as a {0, 255} PNG.

    Raises:
        RasterShapeError: If the images differ in size or aren't divisible by 16
        ValueError: If threshold is given outside (0, 1)
    """
    if threshold is not None and not 0.0 < threshold < 1.0:
        raise ValueError(f"threshold must be in (0, 1), got {threshold}")
    a, b = read_rgb(image_a), read_rgb(image_b)
    if a.shape != b.shape:
        raise RasterShapeError(f"Image sizes differ: {a.shape} vs {b.shape}")
    try:
        check_spatial_size(a.shape[0], a.shape[1])
    except ValueError as e:
        raise RasterShapeError(str(e)) from e

    model, meta = load_checkpoint(checkpoint)
    model.eval()
    output = model(normalize(a).unsqueeze(0), normalize(b).unsqueeze(0))
    if threshold is None:
        threshold = meta.config.threshold
    binary = predict_binary(output.final, threshold)[0, 0].numpy()
    write_binary_map(out, binary)
    return binary


def render_error_map(pred: np.ndarray, label: np.ndarray) -> np.ndarray:
    """Colour each pixel by its agreement class (TP white, FP red, TN black, FN blue).

    Raises:
        RasterShapeError: If shapes differ
    """
    p, y = np.asarray(pred).astype(bool), np.asarray(label).astype(bool)
    if p.shape != y.shape:
        raise RasterShapeError(f"Prediction {p.shape} and label {y.shape} differ")
    error_map = np.zeros(p.shape + (3,), dtype=np.uint8)
    error_map[p & y] = TP_COLOR
    error_map[p & ~y] = FP_COLOR
    error_map[~p & y] = FN_COLOR
    return error_map


def error_map_counts(error_map: np.ndarray) -> ConfusionMatrix:
    """Turn an error map's colour histogram back into confusion counts.

    Raises:
        ValueError: If a pixel has none of the four colours
    """
    def count(color: tuple[int, int, int]) -> int:
        return int(np.count_nonzero(np.all(error_map == np.array(color, dtype=np.uint8), axis=-1)))

    cm = ConfusionMatrix(tp=count(TP_COLOR), fp=count(FP_COLOR), tn=count(TN_COLOR), fn=count(FN_COLOR))
    if cm.total != error_map.shape[0] * error_map.shape[1]:
        raise ValueError("Error map contains colours outside the four agreement classes")
    return cm


def visualize(pred_path: str | Path, label_path: str | Path, out: str | Path) -> ConfusionMatrix:
    """Write the error map of a predicted mask against its label."""
    error_map = render_error_map(read_label(pred_path), read_label(label_path))
    write_png(out, error_map)
    return error_map_counts(error_map)
