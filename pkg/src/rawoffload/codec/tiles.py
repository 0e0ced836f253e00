from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from typing import Sequence

import numpy as np

from ..rawframe import BayerFrame, CfaPattern

DEFAULT_ROWS = 4
DEFAULT_COLS = 3
DEFAULT_OVERLAP = 32
DEFAULT_FILL = 114


@dataclass(frozen=True)
class Rect:
    x: int
    y: int
    w: int
    h: int

    @property
    def x2(self) -> int:
        return self.x + self.w

    @property
    def y2(self) -> int:
        return self.y + self.h

    def intersection_area(self, x1: float, y1: float, x2: float, y2: float) -> float:
        ix = min(self.x2, x2) - max(self.x, x1)
        iy = min(self.y2, y2) - max(self.y, y1)
        return ix * iy if ix > 0 and iy > 0 else 0.0


@dataclass(frozen=True)
class TileGrid:
    """r x c grid over a frame; each tile is its core cell grown by
    ``overlap`` pixels on every edge shared with a neighbour."""

    frame_width: int
    frame_height: int
    rows: int = DEFAULT_ROWS
    cols: int = DEFAULT_COLS
    overlap: int = DEFAULT_OVERLAP

    def __post_init__(self) -> None:
        if self.rows <= 0 or self.cols <= 0:
            raise ValueError("grid rows and cols must be positive")
        if self.overlap < 0 or self.overlap % 2:
            raise ValueError(f"overlap must be even and non-negative, got {self.overlap}")
        if self.frame_width % self.cols or self.frame_height % self.rows:
            raise ValueError(
                f"{self.cols}x{self.rows} grid does not divide a "
                f"{self.frame_width}x{self.frame_height} frame evenly"
            )
        cw, ch = self.core_width, self.core_height
        if cw % 2 or ch % 2:
            raise ValueError(f"core cells must have even dims, got {cw}x{ch}")
        if min(cw, ch) < 2 * self.overlap:
            raise ValueError(f"core cells {cw}x{ch} smaller than twice the overlap {self.overlap}")

    @classmethod
    def for_frame(cls, frame: BayerFrame, **kwargs) -> TileGrid:
        return cls(frame.width, frame.height, **kwargs)

    @property
    def core_width(self) -> int:
        return self.frame_width // self.cols

    @property
    def core_height(self) -> int:
        return self.frame_height // self.rows

    @property
    def tile_count(self) -> int:
        return self.rows * self.cols

    def core(self, index: int) -> Rect:
        self._check_index(index)
        row, col = divmod(index, self.cols)
        return Rect(col * self.core_width, row * self.core_height, self.core_width, self.core_height)

    def tile(self, index: int) -> Rect:
        return self.tile_rects[index]

    @cached_property
    def tile_rects(self) -> tuple[Rect, ...]:
        rects = []
        ov = self.overlap
        for i in range(self.tile_count):
            c = self.core(i)
            x1, y1 = max(0, c.x - ov), max(0, c.y - ov)
            x2 = min(self.frame_width, c.x2 + ov)
            y2 = min(self.frame_height, c.y2 + ov)
            rects.append(Rect(x1, y1, x2 - x1, y2 - y1))
        return tuple(rects)

    def _check_index(self, index: int) -> None:
        if not 0 <= index < self.tile_count:
            raise IndexError(f"tile index {index} outside 0..{self.tile_count - 1}")


def partition(frame: BayerFrame, grid: TileGrid) -> list[BayerFrame]:
    if (frame.width, frame.height) != (grid.frame_width, grid.frame_height):
        raise ValueError(
            f"grid built for {grid.frame_width}x{grid.frame_height}, frame is {frame.width}x{frame.height}"
        )
    return [
        BayerFrame(frame.pixels[r.y : r.y2, r.x : r.x2], frame.pattern) for r in grid.tile_rects
    ]


def assemble_canvas(
    tiles: Sequence[tuple[int, BayerFrame]],
    grid: TileGrid,
    fill_value: int = DEFAULT_FILL,
    pattern: CfaPattern = CfaPattern.RGGB,
) -> BayerFrame:
    """Paste the core region of each (index, tile) pair onto a blank canvas."""
    canvas = np.full((grid.frame_height, grid.frame_width), fill_value, dtype=np.uint8)
    seen: set[int] = set()
    for index, tile in tiles:
        if index in seen:
            raise ValueError(f"duplicate tile index {index}")
        grid._check_index(index)
        seen.add(index)
        outer, core = grid.tile(index), grid.core(index)
        if (tile.width, tile.height) != (outer.w, outer.h):
            raise ValueError(f"tile {index} is {tile.width}x{tile.height}, expected {outer.w}x{outer.h}")
        oy, ox = core.y - outer.y, core.x - outer.x
        canvas[core.y : core.y2, core.x : core.x2] = tile.pixels[oy : oy + core.h, ox : ox + core.w]
        pattern = tile.pattern
    return BayerFrame(canvas, pattern)
