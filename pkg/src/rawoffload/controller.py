"""Dynamic transmission control: bandwidth estimation, content-aware tile
selection with periodic key frames, and LUT-driven codec calibration."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Sequence

from .codec.network import CONFIGS, CodecConfig, config_by_id
from .codec.tiles import TileGrid
from .rawframe import BoundingBox

DEFAULT_WINDOW = 30
DEFAULT_MIN_CONFIDENCE = 0.25


@dataclass(frozen=True)
class ProfileEntry:
    config: CodecConfig
    accuracy: float
    tile_bytes: float
    tx_threshold: float  # seconds

    def __post_init__(self) -> None:
        if self.tile_bytes <= 0:
            raise ValueError(f"profiled tile size must be positive, got {self.tile_bytes}")
        if self.tx_threshold <= 0:
            raise ValueError(f"transmission threshold must be positive, got {self.tx_threshold}")
        if not 0.0 <= self.accuracy <= 1.0:
            raise ValueError(f"accuracy {self.accuracy} outside [0, 1]")

    @property
    def bandwidth(self) -> float:
        """Per-tile bandwidth need in bytes/s."""
        return self.tile_bytes / self.tx_threshold


class Lut:
    """Profiled entries ordered by accuracy, best first; equal accuracy puts
    the cheaper entry first."""

    def __init__(self, entries: Iterable[ProfileEntry]):
        ordered = sorted(entries, key=lambda e: (-e.accuracy, e.bandwidth, e.config.id))
        if not ordered:
            raise ValueError("LUT needs at least one entry")
        ids = [e.config.id for e in ordered]
        if len(set(ids)) != len(ids):
            raise ValueError("LUT lists a codec config more than once")
        self.entries: tuple[ProfileEntry, ...] = tuple(ordered)

    def __iter__(self):
        return iter(self.entries)

    def __len__(self) -> int:
        return len(self.entries)

    def __getitem__(self, i: int) -> ProfileEntry:
        return self.entries[i]

    def __repr__(self) -> str:
        rows = ", ".join(f"{e.config}:P={e.accuracy:.3f},B={e.bandwidth:.0f}" for e in self.entries)
        return f"Lut([{rows}])"

    @property
    def best(self) -> ProfileEntry:
        return self.entries[0]

    @property
    def cheapest(self) -> ProfileEntry:
        return min(self.entries, key=lambda e: (e.bandwidth, -e.accuracy))

    def entry_for(self, config: CodecConfig) -> ProfileEntry:
        for e in self.entries:
            if e.config == config:
                return e
        raise KeyError(config)

    def dumps(self) -> str:
        return "".join(
            f"{e.config.id} {e.accuracy!r} {e.tile_bytes!r} {e.tx_threshold * 1e3!r}\n" for e in self.entries
        )

    def save(self, path: str | Path) -> None:
        Path(path).write_text(self.dumps())

    @classmethod
    def loads(cls, text: str) -> Lut:
        entries = []
        for lineno, line in enumerate(text.splitlines(), 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            parts = line.split()
            if len(parts) != 4:
                raise ValueError(f"LUT line {lineno}: expected 'config_id accuracy tile_bytes tx_threshold_ms'")
            cid, acc, size, thr_ms = parts
            entries.append(ProfileEntry(config_by_id(int(cid)), float(acc), float(size), float(thr_ms) / 1e3))
        return cls(entries)

    @classmethod
    def load(cls, path: str | Path) -> Lut:
        return cls.loads(Path(path).read_text())


def build_lut(profiles: Mapping[int | CodecConfig, tuple[float, float]], tx_threshold: float) -> Lut:
    """``profiles`` maps each config (or its id) to (accuracy, mean tile bytes)."""
    if tx_threshold <= 0:
        raise ValueError("transmission threshold must be positive")
    by_id = {(k.id if isinstance(k, CodecConfig) else int(k)): v for k, v in profiles.items()}
    missing = [c.id for c in CONFIGS if c.id not in by_id]
    if missing:
        raise ValueError(f"no profile for codec configs {missing}")
    return Lut(ProfileEntry(config_by_id(cid), acc, size, tx_threshold) for cid, (acc, size) in by_id.items())


@dataclass(frozen=True)
class BandwidthSample:
    bytes_sent: int
    t_start: float
    t_end: float

    def __post_init__(self) -> None:
        if self.bytes_sent < 0:
            raise ValueError("transmitted size cannot be negative")
        if not self.t_end > self.t_start:
            raise ValueError(f"transmission interval must be positive, got [{self.t_start}, {self.t_end}]")


def estimate_bandwidth(sample: BandwidthSample) -> float:
    return sample.bytes_sent / (sample.t_end - sample.t_start)


def select_tiles(grid: TileGrid, boxes: Sequence[BoundingBox]) -> list[int]:
    """Ascending indexes of tiles whose outer rectangle overlaps any box with
    positive area."""
    selected = []
    for t, rect in enumerate(grid.tile_rects):
        if any(rect.intersection_area(b.x, b.y, b.x2, b.y2) > 0 for b in boxes):
            selected.append(t)
    return selected


def select_config(lut: Lut, tile_count: int, eab: float) -> CodecConfig:
    if tile_count < 0:
        raise ValueError("tile count cannot be negative")
    if tile_count == 0:
        return lut.best.config
    for entry in lut:
        if entry.bandwidth * tile_count <= eab:
            return entry.config
    # nothing fits: stay live on the leanest config instead of skipping
    return lut.cheapest.config


@dataclass(frozen=True)
class TransmissionPlan:
    tiles: tuple[int, ...]
    config: CodecConfig
    is_key_frame: bool

    @property
    def tile_count(self) -> int:
        return len(self.tiles)


@dataclass
class Controller:
    """Runtime configuration adaptation, one instance per stream.

    ``last_results`` is None until the first detection result arrives; in that
    state there is no reference to select against, so every tile is sent.
    Results delivered between frames are queued and applied at the next frame
    boundary.
    """

    lut: Lut
    grid: TileGrid
    window: int = DEFAULT_WINDOW
    min_confidence: float = DEFAULT_MIN_CONFIDENCE
    all_tiles: bool = False
    frame_count: int = 1
    last_results: list[BoundingBox] | None = None
    _pending: list[BoundingBox] | None = field(default=None, repr=False)

    def __post_init__(self) -> None:
        if self.window < 1:
            raise ValueError("key-frame window must be at least one frame")
        if not 1 <= self.frame_count <= self.window:
            raise ValueError(f"frame_count {self.frame_count} outside 1..{self.window}")

    def receive(self, boxes: Sequence[BoundingBox]) -> None:
        self._pending = list(boxes)

    def _apply_pending(self) -> None:
        if self._pending is None:
            return
        w, h = self.grid.frame_width, self.grid.frame_height
        kept = []
        for b in self._pending:
            if b.confidence < self.min_confidence:
                continue
            clipped = b.clamped(w, h)
            if clipped is not None:
                kept.append(clipped)
        self.last_results = kept
        self._pending = None

    def adapt(self, eab: float = math.inf, boxes: Sequence[BoundingBox] | None = None) -> TransmissionPlan:
        if boxes is not None:
            self.receive(boxes)
        self._apply_pending()
        all_tiles = tuple(range(self.grid.tile_count))
        if self.frame_count == 1:
            plan = TransmissionPlan(all_tiles, self.lut.best.config, True)
        else:
            if self.all_tiles or self.last_results is None:
                tiles = all_tiles
            else:
                tiles = tuple(select_tiles(self.grid, self.last_results))
            plan = TransmissionPlan(tiles, select_config(self.lut, len(tiles), eab), False)
        self.frame_count = self.frame_count + 1 if self.frame_count != self.window else 1
        return plan


def default_lut(tx_threshold: float = 0.025, tile_bytes: Sequence[float] | None = None) -> Lut:
    """Placeholder LUT with accuracy ranked by config id (richest first), for
    use before a profiling run."""
    sizes = tile_bytes or [14000.0, 6300.0, 2800.0, 1250.0]
    return build_lut(
        {c.id: (1.0 - 0.05 * c.id, sizes[c.id]) for c in CONFIGS},
        tx_threshold,
    )


__all__ = [
    "BandwidthSample",
    "Controller",
    "Lut",
    "ProfileEntry",
    "TransmissionPlan",
    "build_lut",
    "default_lut",
    "estimate_bandwidth",
    "select_config",
    "select_tiles",
]
