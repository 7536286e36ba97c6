"""MPSoC floorplan: tiles of core grids and the adjacency used for thermal coupling.

Tiles are laid out side by side in a single row. Inside a tile cores sit on a
``rows_per_tile x cols_per_tile`` grid and couple to their 4-neighbours. Cores
are addressed either by :class:`CoreId` or by a flat index
``tile * (rows * cols) + row * cols + col``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterator

from .errors import DomainError


@dataclass(frozen=True, order=True)
class CoreId:
    tile: int
    row: int
    col: int


@dataclass(frozen=True)
class Floorplan:
    """Tile/core grid. The default is the 2-tile, 2x2-core prototype.

    ``all_to_all`` couples every pair of cores inside a tile instead of grid
    4-adjacency; ``inter_tile_coupled`` adds edges between horizontally
    adjacent cores of neighbouring tiles.
    """

    n_tiles: int = 2
    rows_per_tile: int = 2
    cols_per_tile: int = 2
    inter_tile_coupled: bool = False
    all_to_all: bool = False

    def __post_init__(self):
        for name in ("n_tiles", "rows_per_tile", "cols_per_tile"):
            value = getattr(self, name)
            if isinstance(value, bool) or not isinstance(value, int) or value < 1:
                raise DomainError(f"{name} must be an integer >= 1, got {value!r}")

    @property
    def cores_per_tile(self) -> int:
        return self.rows_per_tile * self.cols_per_tile

    @property
    def n_cores(self) -> int:
        return self.n_tiles * self.cores_per_tile

    def is_valid(self, c: CoreId) -> bool:
        return (
            0 <= c.tile < self.n_tiles
            and 0 <= c.row < self.rows_per_tile
            and 0 <= c.col < self.cols_per_tile
        )

    def index(self, c: CoreId) -> int:
        if not self.is_valid(c):
            raise DomainError(f"{c} is not a core of {self}")
        return c.tile * self.cores_per_tile + c.row * self.cols_per_tile + c.col

    def core(self, index: int) -> CoreId:
        if not 0 <= index < self.n_cores:
            raise DomainError(f"flat core index {index} out of range 0..{self.n_cores - 1}")
        tile, rem = divmod(index, self.cores_per_tile)
        row, col = divmod(rem, self.cols_per_tile)
        return CoreId(tile, row, col)

    def cores(self) -> Iterator[CoreId]:
        for i in range(self.n_cores):
            yield self.core(i)

    def tile_slice(self, tile: int) -> slice:
        if not 0 <= tile < self.n_tiles:
            raise DomainError(f"tile {tile} out of range 0..{self.n_tiles - 1}")
        start = tile * self.cores_per_tile
        return slice(start, start + self.cores_per_tile)

    def to_dict(self) -> dict:
        return {
            "n_tiles": self.n_tiles,
            "rows_per_tile": self.rows_per_tile,
            "cols_per_tile": self.cols_per_tile,
            "inter_tile_coupled": self.inter_tile_coupled,
            "all_to_all": self.all_to_all,
        }


def neighbors(fp: Floorplan, c: CoreId) -> list[CoreId]:
    """Cores thermally adjacent to ``c``, sorted by flat index."""
    if not fp.is_valid(c):
        raise DomainError(f"{c} is not a core of {fp}")
    found = set()
    if fp.all_to_all:
        for r in range(fp.rows_per_tile):
            for k in range(fp.cols_per_tile):
                if (r, k) != (c.row, c.col):
                    found.add(CoreId(c.tile, r, k))
    else:
        for dr, dk in ((-1, 0), (1, 0), (0, -1), (0, 1)):
            other = CoreId(c.tile, c.row + dr, c.col + dk)
            if fp.is_valid(other):
                found.add(other)
    if fp.inter_tile_coupled:
        # tiles sit in one row: right edge of tile t touches left edge of t+1
        if c.col == fp.cols_per_tile - 1 and c.tile + 1 < fp.n_tiles:
            found.add(CoreId(c.tile + 1, c.row, 0))
        if c.col == 0 and c.tile > 0:
            found.add(CoreId(c.tile - 1, c.row, fp.cols_per_tile - 1))
    return sorted(found, key=fp.index)


def edges(fp: Floorplan) -> list[tuple[int, int]]:
    """Undirected adjacency as ascending ``(i, j)`` flat-index pairs with i < j."""
    out = []
    for c in fp.cores():
        i = fp.index(c)
        out.extend((i, fp.index(n)) for n in neighbors(fp, c) if fp.index(n) > i)
    return out
