"""Unsigned INT8 feature quantization with calibrated [lo, hi] bounds."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable

import numpy as np


def _f32(value: float) -> float:
    return float(np.float32(value))


@dataclass(frozen=True)
class QuantParams:
    """Bounds are snapped to float32 so the wire copy is bit-identical."""

    lo: float
    hi: float

    def __post_init__(self) -> None:
        lo, hi = _f32(self.lo), _f32(self.hi)
        if not (np.isfinite(lo) and np.isfinite(hi)):
            raise ValueError(f"quant bounds must be finite, got ({self.lo}, {self.hi})")
        if not lo < hi:
            raise ValueError(f"quant bounds need lo < hi, got ({self.lo}, {self.hi})")
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)

    @property
    def step(self) -> float:
        return (self.hi - self.lo) / 255.0


def _round_half_away(v: np.ndarray) -> np.ndarray:
    return np.sign(v) * np.floor(np.abs(v) + 0.5)


def quantize(feat: np.ndarray, q: QuantParams) -> bytes:
    scaled = (np.asarray(feat, dtype=np.float64) - q.lo) * (255.0 / (q.hi - q.lo))
    return np.clip(_round_half_away(scaled), 0, 255).astype(np.uint8).tobytes()


def dequantize(data: bytes | np.ndarray, q: QuantParams, dims: tuple[int, ...]) -> np.ndarray:
    codes = np.frombuffer(bytes(data), dtype=np.uint8) if not isinstance(data, np.ndarray) else data.ravel()
    expected = int(np.prod(dims))
    if codes.size != expected:
        raise ValueError(f"{codes.size} quantized values for dims {dims} (need {expected})")
    return (q.lo + codes.astype(np.float64) * ((q.hi - q.lo) / 255.0)).reshape(dims)


def calibrate(samples: Iterable[np.ndarray | float]) -> QuantParams:
    """Global min/max over the samples; a degenerate range is widened by 1."""
    lo, hi = np.inf, -np.inf
    seen = False
    for s in samples:
        arr = np.asarray(s, dtype=np.float64)
        if arr.size == 0:
            continue
        seen = True
        lo, hi = min(lo, float(arr.min())), max(hi, float(arr.max()))
    if not seen:
        raise ValueError("cannot calibrate quantization on an empty sample set")
    if lo == hi:
        hi = lo + 1.0
    # round outward so nothing inside the observed range gets clamped
    # (compare as float64: a float32 scalar would pull the python float down)
    lo32, hi32 = np.float32(lo), np.float32(hi)
    if float(lo32) > lo:
        lo32 = np.nextafter(lo32, np.float32(-np.inf))
    if float(hi32) < hi:
        hi32 = np.nextafter(hi32, np.float32(np.inf))
    return QuantParams(float(lo32), float(hi32))
