"""Bayer RAW frames: CFA plane disassembly, bilinear demosaic, luminosity
scaling, Sobel-Tenengrad sharpness and the on-disk RAW/truth formats."""

from __future__ import annotations

import enum
import struct
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path
from typing import Iterable

import numpy as np
from scipy import ndimage

# 2x2 cell sites in raster order: (0,0), (0,1), (1,0), (1,1)
SITES = ((0, 0), (0, 1), (1, 0), (1, 1))


class CfaPattern(enum.IntEnum):
    RGGB = 0
    BGGR = 1
    GRBG = 2
    GBRG = 3

    @property
    def colors(self) -> str:
        """Color letter of each CFA site, raster order."""
        return self.name

    def color_mask(self, height: int, width: int, color: str) -> np.ndarray:
        mask = np.zeros((height, width), dtype=bool)
        for (dy, dx), c in zip(SITES, self.colors):
            if c == color:
                mask[dy::2, dx::2] = True
        return mask


@dataclass(frozen=True)
class BayerFrame:
    pixels: np.ndarray
    pattern: CfaPattern = CfaPattern.RGGB

    def __post_init__(self) -> None:
        px = np.asarray(self.pixels)
        if px.ndim != 2:
            raise ValueError(f"Bayer frame must be 2-D, got shape {px.shape}")
        h, w = px.shape
        if h <= 0 or w <= 0 or h % 2 or w % 2:
            raise ValueError(f"Bayer frame dims must be positive and even, got {w}x{h}")
        if px.dtype != np.uint8:
            if px.size and (px.min() < 0 or px.max() > 255):
                raise ValueError("Bayer samples must lie in [0, 255]")
            px = px.astype(np.uint8)
        px = np.ascontiguousarray(px)
        px.setflags(write=False)
        object.__setattr__(self, "pixels", px)
        object.__setattr__(self, "pattern", CfaPattern(self.pattern))

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, BayerFrame):
            return NotImplemented
        return self.pattern == other.pattern and np.array_equal(self.pixels, other.pixels)

    __hash__ = None  # type: ignore[assignment]


@dataclass(frozen=True)
class PlanarFrame:
    """Four half-resolution planes in CFA-site raster order, shape (4, h, w)."""

    planes: np.ndarray

    def __post_init__(self) -> None:
        planes = np.asarray(self.planes)
        if planes.ndim != 3 or planes.shape[0] != 4:
            raise ValueError(f"planar frame needs shape (4, h, w), got {planes.shape}")
        if planes.shape[1] <= 0 or planes.shape[2] <= 0:
            raise ValueError("planar frame planes must be non-empty")
        object.__setattr__(self, "planes", planes)

    @property
    def height(self) -> int:
        return self.planes.shape[1]

    @property
    def width(self) -> int:
        return self.planes.shape[2]


@dataclass(frozen=True)
class RgbFrame:
    pixels: np.ndarray  # (h, w, 3) uint8

    def __post_init__(self) -> None:
        px = np.asarray(self.pixels)
        if px.ndim != 3 or px.shape[2] != 3:
            raise ValueError(f"RGB frame needs shape (h, w, 3), got {px.shape}")
        object.__setattr__(self, "pixels", px.astype(np.uint8, copy=False))

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    @property
    def width(self) -> int:
        return self.pixels.shape[1]


@dataclass(frozen=True)
class BoundingBox:
    class_id: int
    x: float
    y: float
    w: float
    h: float
    confidence: float = 1.0

    def __post_init__(self) -> None:
        if self.w <= 0 or self.h <= 0:
            raise ValueError(f"box extents must be positive, got w={self.w} h={self.h}")
        if not 0.0 <= self.confidence <= 1.0:
            raise ValueError(f"confidence {self.confidence} outside [0, 1]")

    @property
    def x2(self) -> float:
        return self.x + self.w

    @property
    def y2(self) -> float:
        return self.y + self.h

    @property
    def area(self) -> float:
        return self.w * self.h

    def clamped(self, width: int, height: int) -> BoundingBox | None:
        """Clip to the frame; None when nothing of positive area is left."""
        x1, y1 = max(self.x, 0.0), max(self.y, 0.0)
        x2, y2 = min(self.x2, float(width)), min(self.y2, float(height))
        if x2 <= x1 or y2 <= y1:
            return None
        return BoundingBox(self.class_id, x1, y1, x2 - x1, y2 - y1, self.confidence)


def disassemble(frame: BayerFrame) -> PlanarFrame:
    px = frame.pixels
    return PlanarFrame(np.stack([px[dy::2, dx::2] for dy, dx in SITES]))


def reassemble(planar: PlanarFrame, pattern: CfaPattern = CfaPattern.RGGB) -> BayerFrame:
    planes = planar.planes
    h, w = planar.height, planar.width
    out = np.empty((2 * h, 2 * w), dtype=planes.dtype)
    for p, (dy, dx) in enumerate(SITES):
        out[dy::2, dx::2] = planes[p]
    return BayerFrame(out, pattern)


# Neighbour-average kernels; with the CFA sample masks these reduce to the
# textbook bilinear rules (4-neighbour mean for G, 2/4-neighbour for R and B).
_K_GREEN = np.array([[0, 1, 0], [1, 4, 1], [0, 1, 0]], dtype=np.float64) / 4.0
_K_RED_BLUE = np.array([[1, 2, 1], [2, 4, 2], [1, 2, 1]], dtype=np.float64) / 4.0


def _filter3(img: np.ndarray, kernel: np.ndarray) -> np.ndarray:
    # scipy's "mirror" is numpy's "reflect": the edge sample is not repeated,
    # which keeps the CFA parity of border neighbours
    return ndimage.correlate(img, kernel, mode="mirror")


def demosaic_bilinear(frame: BayerFrame) -> RgbFrame:
    px = frame.pixels.astype(np.float64)
    h, w = px.shape
    channels = []
    for color, kernel in (("R", _K_RED_BLUE), ("G", _K_GREEN), ("B", _K_RED_BLUE)):
        mask = frame.pattern.color_mask(h, w, color)
        channels.append(_filter3(np.where(mask, px, 0.0), kernel))
    rgb = np.floor(np.stack(channels, axis=-1) + 0.5)
    return RgbFrame(np.clip(rgb, 0, 255).astype(np.uint8))


def scale_luminosity(frame: BayerFrame, factor: Fraction | float) -> BayerFrame:
    factor = Fraction(factor).limit_denominator(1 << 20)
    if not 0 < factor <= 1:
        raise ValueError(f"luminosity factor must be in (0, 1], got {factor}")
    scaled = (frame.pixels.astype(np.int64) * factor.numerator) // factor.denominator
    return BayerFrame(np.clip(scaled, 0, 255).astype(np.uint8), frame.pattern)


SOBEL_X = np.array([[-1, 0, 1], [-2, 0, 2], [-1, 0, 1]], dtype=np.int64)
SOBEL_Y = np.array([[-1, -2, -1], [0, 0, 0], [1, 2, 1]], dtype=np.int64)


def tenengrad(image: np.ndarray) -> int:
    """Sum of squared Sobel gradient magnitudes over interior pixels.

    Exact integer arithmetic for integer input; no border padding.
    """
    img = np.asarray(image)
    if img.ndim != 2 or img.shape[0] < 3 or img.shape[1] < 3:
        raise ValueError(f"tenengrad needs a 2-D image of at least 3x3, got {img.shape}")
    img = img.astype(np.int64)
    h, w = img.shape
    gx = np.zeros((h - 2, w - 2), dtype=np.int64)
    gy = np.zeros_like(gx)
    for dy in range(3):
        for dx in range(3):
            window = img[dy : dy + h - 2, dx : dx + w - 2]
            gx += SOBEL_X[dy, dx] * window
            gy += SOBEL_Y[dy, dx] * window
    return int(np.sum(gx * gx + gy * gy))


# RAW container: magic, version u8, pattern u8, width u32, height u32, 2 reserved
RAW_MAGIC = b"ABRW"
RAW_VERSION = 1
_RAW_HEADER = struct.Struct("<4sBBII2x")


def encode_raw(frame: BayerFrame) -> bytes:
    header = _RAW_HEADER.pack(RAW_MAGIC, RAW_VERSION, int(frame.pattern), frame.width, frame.height)
    return header + frame.pixels.tobytes()


def decode_raw(data: bytes) -> BayerFrame:
    if len(data) < _RAW_HEADER.size:
        raise ValueError("RAW data shorter than header")
    magic, version, pattern, width, height = _RAW_HEADER.unpack_from(data)
    if magic != RAW_MAGIC:
        raise ValueError(f"bad RAW magic {magic!r}")
    if version != RAW_VERSION:
        raise ValueError(f"unsupported RAW version {version}")
    body = data[_RAW_HEADER.size :]
    if len(body) != width * height:
        raise ValueError(f"RAW body holds {len(body)} bytes, expected {width * height}")
    return BayerFrame(np.frombuffer(body, dtype=np.uint8).reshape(height, width), CfaPattern(pattern))


def write_raw(path: str | Path, frame: BayerFrame) -> None:
    Path(path).write_bytes(encode_raw(frame))


def read_raw(path: str | Path) -> BayerFrame:
    return decode_raw(Path(path).read_bytes())


def format_truth(boxes: Iterable[BoundingBox]) -> str:
    lines = [f"{b.class_id} {b.x:g} {b.y:g} {b.w:g} {b.h:g}" for b in boxes]
    return "".join(line + "\n" for line in lines)


def parse_truth(text: str) -> list[BoundingBox]:
    boxes = []
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.strip()
        if not line:
            continue
        parts = line.split()
        if len(parts) != 5:
            raise ValueError(f"truth line {lineno}: expected 'class x y w h', got {line!r}")
        cls, x, y, w, h = parts
        boxes.append(BoundingBox(int(cls), float(x), float(y), float(w), float(h)))
    return boxes


def mse(a: np.ndarray | BayerFrame, b: np.ndarray | BayerFrame) -> float:
    a_arr = a.pixels if isinstance(a, BayerFrame) else np.asarray(a)
    b_arr = b.pixels if isinstance(b, BayerFrame) else np.asarray(b)
    if a_arr.shape != b_arr.shape:
        raise ValueError(f"shape mismatch {a_arr.shape} vs {b_arr.shape}")
    if a_arr.size == 0:
        raise ValueError("mse of empty inputs")
    diff = a_arr.astype(np.float64) - b_arr.astype(np.float64)
    return float(np.mean(diff * diff))


def crop(frame: BayerFrame, x: int, y: int, w: int, h: int) -> BayerFrame:
    if x % 2 or y % 2:
        raise ValueError("crop origin must be even to keep the CFA phase")
    return BayerFrame(frame.pixels[y : y + h, x : x + w], frame.pattern)

