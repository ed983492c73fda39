"""Non-overlapping tiling of co-registered bi-temporal rasters."""

from dataclasses import dataclass
from typing import List, NamedTuple, Sequence

import numpy as np

from src.core.errors import RasterShapeError
from src.core.raster_io import binarize_label


@dataclass(frozen=True)
class RawPair:
    """A bi-temporal image pair with its change mask.

    image_a/image_b are H×W×3 uint8, label is H×W with values in {0, 1}.
    """

    image_a: np.ndarray
    image_b: np.ndarray
    label: np.ndarray
    id: str

    def __post_init__(self) -> None:
        a, b, lab = self.image_a.shape, self.image_b.shape, self.label.shape
        if a != b or a[:2] != lab[:2] or len(lab) != 2:
            raise RasterShapeError(
                f"Raster size mismatch for '{self.id}': A={a} B={b} label={lab}",
                sample_id=self.id,
            )
        # 255-coded masks are stored as {0, 1}
        object.__setattr__(self, "label", binarize_label(self.label))

    @property
    def height(self) -> int:
        return self.image_a.shape[0]

    @property
    def width(self) -> int:
        return self.image_a.shape[1]


class TileOrigin(NamedTuple):
    source_id: str
    row: int
    col: int

    @property
    def tile_id(self) -> str:
        return f"{self.source_id}_{self.row}_{self.col}"


@dataclass(frozen=True)
class Tile:
    """Footprint of one tile: raw (pre-normalization) rasters and its origin."""

    tile_a: np.ndarray
    tile_b: np.ndarray
    tile_label: np.ndarray
    origin: TileOrigin


def tile_pair(pair: RawPair, tile_size: int) -> List[Tile]:
    """Cut a pair into a regular grid of tile_size tiles anchored at (0, 0).

    Rows and columns beyond the last full tile are discarded, so a H×W pair
    yields floor(H/t) * floor(W/t) tiles that never overlap.

    Raises:
        ValueError: If tile_size < 1
    """
    if tile_size < 1:
        raise ValueError(f"tile_size must be >= 1, got {tile_size}")

    tiles: List[Tile] = []
    rows, cols = pair.height // tile_size, pair.width // tile_size
    for i in range(rows):
        for j in range(cols):
            r, c = i * tile_size, j * tile_size
            window = (slice(r, r + tile_size), slice(c, c + tile_size))
            tiles.append(
                Tile(
                    tile_a=pair.image_a[window].copy(),
                    tile_b=pair.image_b[window].copy(),
                    tile_label=pair.label[window].copy(),
                    origin=TileOrigin(pair.id, r, c),
                )
            )
    return tiles


def reassemble_tiles(tiles: Sequence[Tile], height: int, width: int) -> RawPair:
    """Paste tiles back at their origins into H×W rasters.

    Pixels no tile covers stay zero. Used to check that tiling partitions the
    covered prefix and by whole-scene prediction.
    """
    if not tiles:
        raise ValueError("No tiles to reassemble")
    source_id = tiles[0].origin.source_id
    image_a = np.zeros((height, width, 3), dtype=tiles[0].tile_a.dtype)
    image_b = np.zeros_like(image_a)
    label = np.zeros((height, width), dtype=tiles[0].tile_label.dtype)
    for tile in tiles:
        r, c = tile.origin.row, tile.origin.col
        h, w = tile.tile_label.shape
        image_a[r : r + h, c : c + w] = tile.tile_a
        image_b[r : r + h, c : c + w] = tile.tile_b
        label[r : r + h, c : c + w] = tile.tile_label
    return RawPair(image_a=image_a, image_b=image_b, label=label, id=source_id)
