"""Synthetic Bayer scenes: coloured rectangles over a noisy dark background.

Ground truth is exact by construction, which is what the detector and the
tile-selection checks rely on.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .rawframe import SITES, BayerFrame, BoundingBox, CfaPattern, format_truth, parse_truth, read_raw, write_raw

# class id -> RGB; saturated and pairwise far apart in Chebyshev distance
PALETTE: tuple[tuple[int, int, int], ...] = (
    (255, 0, 0),
    (0, 255, 0),
    (0, 0, 255),
    (255, 255, 0),
    (0, 255, 255),
    (255, 0, 255),
)

BACKGROUND_LEVEL = 48
NOISE_AMPLITUDE = 6
MIN_GAP = 16
MAX_PLACEMENT_TRIES = 500


@dataclass
class SyntheticScene:
    frame: BayerFrame
    truth: list[BoundingBox]
    seed: int


@dataclass
class _Rect:
    class_id: int
    x: int
    y: int
    w: int
    h: int
    vx: int = 0
    vy: int = 0

    def separated(self, other: _Rect, gap: int) -> bool:
        return (
            self.x + self.w + gap <= other.x
            or other.x + other.w + gap <= self.x
            or self.y + self.h + gap <= other.y
            or other.y + other.h + gap <= self.y
        )

    def box(self) -> BoundingBox:
        return BoundingBox(self.class_id, float(self.x), float(self.y), float(self.w), float(self.h))


@dataclass
class SceneParams:
    width: int = 768
    height: int = 512
    object_count: int = 3
    pattern: CfaPattern = CfaPattern.RGGB
    min_size: int = 48
    max_size: int = 112
    max_speed: int = 4
    background: int = BACKGROUND_LEVEL
    noise: int = NOISE_AMPLITUDE


def _check_dims(width: int, height: int, object_count: int) -> None:
    if width % 2 or height % 2 or width < 64 or height < 64:
        raise ValueError(f"scene dims must be even and >= 64, got {width}x{height}")
    if object_count < 0:
        raise ValueError("object_count must be >= 0")
    if object_count > len(PALETTE):
        raise ValueError(f"at most {len(PALETTE)} distinctly coloured objects per scene")


def _place(rng: np.random.Generator, p: SceneParams) -> list[_Rect]:
    max_size = min(p.max_size, p.width // 2, p.height // 2)
    min_size = min(p.min_size, max_size)
    classes = rng.permutation(len(PALETTE))[: p.object_count]
    rects: list[_Rect] = []
    for cls in classes:
        for _ in range(MAX_PLACEMENT_TRIES):
            w = int(rng.integers(min_size, max_size + 1))
            h = int(rng.integers(min_size, max_size + 1))
            cand = _Rect(
                int(cls),
                int(rng.integers(0, p.width - w + 1)),
                int(rng.integers(0, p.height - h + 1)),
                w,
                h,
            )
            if all(cand.separated(r, MIN_GAP) for r in rects):
                break
        else:
            raise RuntimeError(
                f"could not place {p.object_count} non-overlapping objects in "
                f"{p.width}x{p.height} after {MAX_PLACEMENT_TRIES} tries"
            )
        rects.append(cand)
    return rects


def render(rects: list[_Rect], rng: np.random.Generator, p: SceneParams) -> BayerFrame:
    rgb = np.full((p.height, p.width, 3), p.background, dtype=np.int16)
    for r in rects:
        rgb[r.y : r.y + r.h, r.x : r.x + r.w] = PALETTE[r.class_id]
    noise = rng.integers(-p.noise, p.noise + 1, size=(p.height, p.width), dtype=np.int16)
    mosaic = np.empty((p.height, p.width), dtype=np.int16)
    channel_index = {"R": 0, "G": 1, "B": 2}
    for (dy, dx), color in zip(SITES, p.pattern.colors):
        mosaic[dy::2, dx::2] = rgb[dy::2, dx::2, channel_index[color]]
    return BayerFrame(np.clip(mosaic + noise, 0, 255).astype(np.uint8), p.pattern)


def generate_scene(
    seed: int,
    width: int = 768,
    height: int = 512,
    object_count: int = 3,
    pattern: CfaPattern = CfaPattern.RGGB,
    **kwargs,
) -> SyntheticScene:
    _check_dims(width, height, object_count)
    p = SceneParams(width, height, object_count, CfaPattern(pattern), **kwargs)
    rng = np.random.default_rng(seed)
    rects = _place(rng, p)
    frame = render(rects, rng, p)
    return SyntheticScene(frame, [r.box() for r in rects], seed)


def _step(rects: list[_Rect], p: SceneParams) -> None:
    for r in rects:
        nx, ny = r.x + r.vx, r.y + r.vy
        if nx < 0 or nx + r.w > p.width:
            r.vx = -r.vx
            nx = r.x + r.vx
        if ny < 0 or ny + r.h > p.height:
            r.vy = -r.vy
            ny = r.y + r.vy
        r.x, r.y = nx, ny


def _collides(rects: list[_Rect]) -> bool:
    return any(not a.separated(b, 0) for i, a in enumerate(rects) for b in rects[i + 1 :])


def generate_sequence(
    seed: int,
    n_frames: int,
    width: int = 768,
    height: int = 512,
    object_count: int = 3,
    pattern: CfaPattern = CfaPattern.RGGB,
    **kwargs,
) -> list[SyntheticScene]:
    """Objects drifting at constant velocity (at most ``max_speed`` px per
    frame per axis), bouncing off the borders, never overlapping."""
    _check_dims(width, height, object_count)
    p = SceneParams(width, height, object_count, CfaPattern(pattern), **kwargs)
    rng = np.random.default_rng(seed)
    for _ in range(MAX_PLACEMENT_TRIES):
        rects = _place(rng, p)
        for r in rects:
            r.vx = int(rng.integers(-p.max_speed, p.max_speed + 1))
            r.vy = int(rng.integers(-p.max_speed, p.max_speed + 1))
        trial = [_Rect(**vars(r)) for r in rects]
        ok = True
        for _ in range(n_frames):
            if _collides(trial):
                ok = False
                break
            _step(trial, p)
        if ok:
            break
    else:
        raise RuntimeError("could not find a collision-free object trajectory")

    scenes = []
    for k in range(n_frames):
        frame_rng = np.random.default_rng([seed, k])
        scenes.append(SyntheticScene(render(rects, frame_rng, p), [r.box() for r in rects], seed))
        _step(rects, p)
    return scenes


def write_corpus(directory: str | Path, scenes: Sequence[SyntheticScene]) -> list[Path]:
    """``frame_NNNN.raw`` plus a ``frame_NNNN.txt`` truth sidecar per scene."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    paths = []
    for i, s in enumerate(scenes):
        path = directory / f"frame_{i:04d}.raw"
        write_raw(path, s.frame)
        path.with_suffix(".txt").write_text(format_truth(s.truth))
        paths.append(path)
    return paths


def read_corpus(directory: str | Path) -> list[SyntheticScene]:
    """Frames in name order; a missing sidecar means no objects."""
    paths = sorted(Path(directory).glob("*.raw"))
    if not paths:
        raise ValueError(f"no .raw frames in {directory}")
    scenes = []
    for i, path in enumerate(paths):
        sidecar = path.with_suffix(".txt")
        truth = parse_truth(sidecar.read_text()) if sidecar.exists() else []
        scenes.append(SyntheticScene(read_raw(path), truth, i))
    return scenes
