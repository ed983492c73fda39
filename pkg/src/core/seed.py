"""Seeding and deterministic synthetic bi-temporal data.

The synthetic pairs stand in for LEVIR-CD/WHU-CD at desk scale: a random
background, a slightly perturbed second date, and bright rectangles inserted
into the second date as the changes.
"""

import random
from pathlib import Path
from typing import Mapping

import numpy as np
import torch
from rich.console import Console

from src.core.raster_io import write_binary_map, write_png
from src.data.tiling import RawPair

console = Console()

# Fixed seed for reproducibility
RANDOM_SEED = 42


def seed_everything(seed: int = RANDOM_SEED) -> torch.Generator:
    """Seed python, numpy and torch; return a torch generator for data loading."""
    random.seed(seed)
    np.random.seed(seed)
    torch.manual_seed(seed)
    return torch.Generator().manual_seed(seed)


def synthesize_pair(
    rng: np.random.Generator,
    height: int,
    width: int,
    sample_id: str,
    max_changes: int = 3,
) -> RawPair:
    """One pair with 1..max_changes rectangular changes."""
    image_a = rng.integers(0, 160, size=(height, width, 3), dtype=np.uint8)
    jitter = rng.integers(-10, 11, size=image_a.shape)
    image_b = np.clip(image_a.astype(np.int16) + jitter, 0, 255).astype(np.uint8)
    label = np.zeros((height, width), dtype=np.uint8)

    for _ in range(int(rng.integers(1, max_changes + 1))):
        h = int(rng.integers(max(1, height // 8), max(2, height // 3) + 1))
        w = int(rng.integers(max(1, width // 8), max(2, width // 3) + 1))
        r = int(rng.integers(0, height - h + 1))
        c = int(rng.integers(0, width - w + 1))
        image_b[r : r + h, c : c + w] = rng.integers(200, 256, size=3, dtype=np.uint8)
        label[r : r + h, c : c + w] = 1

    return RawPair(image_a=image_a, image_b=image_b, label=label, id=sample_id)


def write_synthetic_dataset(
    root: str | Path,
    split_counts: Mapping[str, int],
    height: int = 256,
    width: int = 256,
    seed: int = RANDOM_SEED,
) -> dict[str, int]:
    """Write pairs in the ``<root>/<split>/{A,B,label}/<id>.png`` layout.

    Returns:
        Number of pairs written per split
    """
    root = Path(root)
    rng = np.random.default_rng(seed)
    written: dict[str, int] = {}
    for split, count in split_counts.items():
        for i in range(count):
            pair = synthesize_pair(rng, height, width, f"synth_{split}_{i:04d}")
            name = f"{pair.id}.png"
            write_png(root / split / "A" / name, pair.image_a)
            write_png(root / split / "B" / name, pair.image_b)
            write_binary_map(root / split / "label" / name, pair.label)
        written[split] = count
        console.print(f"[green]✓[/green] {split}: {count} synthetic pairs")
    return written
