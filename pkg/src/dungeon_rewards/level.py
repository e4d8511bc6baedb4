"""Tile vocabulary, the level grid container, and text/PNG rendering."""

from __future__ import annotations

import io
from dataclasses import dataclass
from enum import IntEnum
from typing import Iterator

import numpy as np
from PIL import Image


class Tile(IntEnum):
    EMPTY = 1
    WALL = 2
    PLAYER = 3
    BAT = 4
    SCORPION = 5
    SPIDER = 6
    KEY = 7
    DOOR = 8


ENEMIES = (Tile.BAT, Tile.SCORPION, Tile.SPIDER)
NUM_TILE_IDS = 9  # index 0 unused; lets count arrays be indexed by tile value

GLYPHS = {
    Tile.EMPTY: ".",
    Tile.WALL: "#",
    Tile.PLAYER: "P",
    Tile.BAT: "B",
    Tile.SCORPION: "S",
    Tile.SPIDER: "X",
    Tile.KEY: "K",
    Tile.DOOR: "D",
}
GLYPH_TO_TILE = {g: t for t, g in GLYPHS.items()}

PALETTE = {
    Tile.EMPTY: (0xDC, 0xDC, 0xDC),
    Tile.WALL: (0x40, 0x40, 0x40),
    Tile.PLAYER: (0x1E, 0x90, 0xFF),
    Tile.BAT: (0x8B, 0x00, 0x8B),
    Tile.SCORPION: (0xB8, 0x86, 0x0B),
    Tile.SPIDER: (0x00, 0x64, 0x00),
    Tile.KEY: (0xFF, 0xD7, 0x00),
    Tile.DOOR: (0xB2, 0x22, 0x22),
}

# Level-sized grids (generated content, level files) stay within these bounds.
MIN_SIDE = 10
MAX_SIDE = 20
DEFAULT_SIDE = 16

_VALID = np.zeros(256, dtype=bool)
_VALID[[int(t) for t in Tile]] = True

_RGB_LUT = np.zeros((NUM_TILE_IDS, 3), dtype=np.uint8)
for _t, _rgb in PALETTE.items():
    _RGB_LUT[int(_t)] = _rgb


class LevelError(ValueError):
    pass


def tile(value: int) -> Tile:
    """Validate an integer tile id."""
    try:
        return Tile(value)
    except ValueError:
        raise LevelError(f"invalid tile id {value!r}; expected 1..8") from None


def tile_glyph(t: int) -> str:
    return GLYPHS[tile(t)]


def check_level_dims(height: int, width: int) -> None:
    if not (MIN_SIDE <= height <= MAX_SIDE and MIN_SIDE <= width <= MAX_SIDE):
        raise LevelError(
            f"level dimensions {height}x{width} outside {MIN_SIDE}..{MAX_SIDE}"
        )


@dataclass(frozen=True)
class Position:
    row: int
    col: int

    def __iter__(self) -> Iterator[int]:
        yield self.row
        yield self.col


class LevelGrid:
    """Immutable h x w matrix of tile ids, stored row-major.

    The container itself accepts any positive size; the 10..20 level bounds
    are enforced where levels are produced or read (``EnvConfig``,
    ``parse_text``).
    """

    __slots__ = ("_cells", "_hash")

    def __init__(self, cells, *, validate: bool = True):
        arr = np.array(cells, dtype=np.uint8, copy=True)
        if validate:
            if arr.ndim != 2 or arr.shape[0] < 1 or arr.shape[1] < 1:
                raise LevelError(f"grid must be a non-empty 2-D array, got shape {arr.shape}")
            if not _VALID[arr].all():
                bad = sorted({int(v) for v in arr.ravel() if not _VALID[v]})
                raise LevelError(f"invalid tile ids {bad}; expected 1..8")
        arr.setflags(write=False)
        self._cells = arr
        self._hash = None

    @classmethod
    def _trusted(cls, arr: np.ndarray) -> "LevelGrid":
        # Takes ownership of an already-validated uint8 array.
        g = cls.__new__(cls)
        arr.setflags(write=False)
        g._cells = arr
        g._hash = None
        return g

    @classmethod
    def filled(cls, height: int, width: int, t: int = Tile.EMPTY) -> "LevelGrid":
        return cls(np.full((height, width), int(tile(t)), dtype=np.uint8))

    @property
    def cells(self) -> np.ndarray:
        """Read-only ``(height, width)`` uint8 view."""
        return self._cells

    @property
    def height(self) -> int:
        return self._cells.shape[0]

    @property
    def width(self) -> int:
        return self._cells.shape[1]

    @property
    def shape(self) -> tuple[int, int]:
        return self._cells.shape

    def __getitem__(self, pos) -> Tile:
        r, c = pos
        return Tile(int(self._cells[r, c]))

    def with_cell(self, pos, t: int) -> "LevelGrid":
        arr = self._cells.copy()
        r, c = pos
        arr[r, c] = int(tile(t))
        return LevelGrid._trusted(arr)

    def count(self, t: int) -> int:
        return int(np.count_nonzero(self._cells == int(t)))

    def positions(self, t: int) -> list[Position]:
        rows, cols = np.nonzero(self._cells == int(t))
        return [Position(int(r), int(c)) for r, c in zip(rows, cols)]

    def in_bounds(self, pos) -> bool:
        r, c = pos
        return 0 <= r < self.height and 0 <= c < self.width

    def __eq__(self, other) -> bool:
        if not isinstance(other, LevelGrid):
            return NotImplemented
        return self.shape == other.shape and bool(np.array_equal(self._cells, other._cells))

    def __hash__(self) -> int:
        if self._hash is None:
            self._hash = hash((self.shape, self._cells.tobytes()))
        return self._hash

    def __repr__(self) -> str:
        return f"LevelGrid({self.height}x{self.width})"

    def __str__(self) -> str:
        return render_text(self)


def render_text(g: LevelGrid) -> str:
    lut = np.array([" "] + [GLYPHS[Tile(i)] for i in range(1, NUM_TILE_IDS)])
    return "".join("".join(row) + "\n" for row in lut[g.cells])


def parse_text(s: str, *, bounded: bool = True) -> LevelGrid:
    """Inverse of :func:`render_text`.

    With ``bounded`` (the default) the grid must be level-sized (10..20 per
    side). Blank lines at the end are ignored; any other ragged row is an error.
    """
    lines = s.splitlines()
    while lines and not lines[-1].strip():
        lines.pop()
    if not lines:
        raise LevelError("empty level text")
    width = len(lines[0])
    rows = []
    for i, line in enumerate(lines, 1):
        if len(line) != width:
            raise LevelError(f"ragged row {i}: length {len(line)}, expected {width}")
        row = []
        for j, ch in enumerate(line, 1):
            t = GLYPH_TO_TILE.get(ch)
            if t is None:
                raise LevelError(f"unknown glyph {ch!r} at row {i}, column {j}")
            row.append(int(t))
        rows.append(row)
    if bounded:
        check_level_dims(len(rows), width)
    return LevelGrid._trusted(np.array(rows, dtype=np.uint8))


def render_image(g: LevelGrid, cell_px: int = 16) -> bytes:
    """PNG bytes with one flat ``cell_px`` square per tile."""
    if cell_px < 1:
        raise ValueError("cell_px must be >= 1")
    rgb = _RGB_LUT[g.cells]
    rgb = np.repeat(np.repeat(rgb, cell_px, axis=0), cell_px, axis=1)
    buf = io.BytesIO()
    Image.fromarray(rgb, mode="RGB").save(buf, format="PNG", optimize=False)
    return buf.getvalue()
