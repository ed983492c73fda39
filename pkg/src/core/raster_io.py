"""Raster I/O: read and write the 8-bit PNG tiles the pipeline exchanges."""

from pathlib import Path

import numpy as np
from PIL import Image


def read_rgb(file_path: str | Path) -> np.ndarray:
    """Read an image as an H×W×3 uint8 array.

    Raises:
        FileNotFoundError: If the file doesn't exist
    """
    path = Path(file_path)
    if not path.exists():
        raise FileNotFoundError(f"File not found: {path}")
    with Image.open(path) as img:
        return np.asarray(img.convert("RGB"), dtype=np.uint8).copy()


def binarize_label(label: np.ndarray) -> np.ndarray:
    """Map any non-zero value (1 or 255 coded positives) to 1. Idempotent."""
    return (np.asarray(label) > 0).astype(np.uint8)


def read_label(file_path: str | Path) -> np.ndarray:
    """Read a single-channel change mask as an H×W array of {0, 1}.

    Raises:
        FileNotFoundError: If the file doesn't exist
    """
    path = Path(file_path)
    if not path.exists():
        raise FileNotFoundError(f"File not found: {path}")
    with Image.open(path) as img:
        return binarize_label(np.asarray(img.convert("L")))


def write_png(file_path: str | Path, array: np.ndarray) -> None:
    """Write an H×W or H×W×3 uint8 array losslessly as PNG."""
    path = Path(file_path)
    path.parent.mkdir(parents=True, exist_ok=True)
    Image.fromarray(np.ascontiguousarray(array, dtype=np.uint8)).save(path, format="PNG")


def write_binary_map(file_path: str | Path, binary: np.ndarray) -> None:
    """Write a {0, 1} map as a single-channel {0, 255} PNG."""
    write_png(file_path, binarize_label(binary) * np.uint8(255))
