from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from typing import Callable, Mapping, Sequence

import numpy as np

from ..codec.network import CONFIGS, CodecConfig, CodecWeights
from ..codec.quant import QuantParams
from ..codec.tile_codec import decode_tile_full, encode_tile_full
from ..codec.tiles import DEFAULT_FILL, TileGrid, assemble_canvas, partition
from ..controller import Lut, build_lut
from ..rawframe import BoundingBox, RgbFrame, demosaic_bilinear, mse
from ..scene import SyntheticScene
from .detector import detect
from .metrics import evaluate


@dataclass(frozen=True)
class ParetoRow:
    config: CodecConfig
    map: float
    f1: float
    mean_frame_bytes: float
    mean_tile_bytes: float
    raw_len: float  # mean quantized bytes per frame, before entropy coding
    mse: float


PARETO_HEADER = ("config_id", "stride", "channels", "map", "f1", "mean_frame_bytes", "mean_tile_bytes", "raw_frame_bytes", "mse")


@dataclass
class Profile:
    lut: Lut
    rows: list[ParetoRow]

    def row(self, config: CodecConfig) -> ParetoRow:
        return next(r for r in self.rows if r.config == config)

    def csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(PARETO_HEADER)
        for r in self.rows:
            w.writerow(
                [
                    r.config.id,
                    r.config.stride,
                    r.config.channels,
                    f"{r.map:.6f}",
                    f"{r.f1:.6f}",
                    f"{r.mean_frame_bytes:.1f}",
                    f"{r.mean_tile_bytes:.1f}",
                    f"{r.raw_len:.1f}",
                    f"{r.mse:.6f}",
                ]
            )
        return buf.getvalue()


def roundtrip_frame(
    scene: SyntheticScene,
    config: CodecConfig,
    weights: CodecWeights,
    grid: TileGrid,
    quant: QuantParams,
    fill_value: int = DEFAULT_FILL,
):
    """Every tile through the codec; returns (canvas, payload sizes, raw sizes)."""
    tiles = partition(scene.frame, grid)
    decoded, payloads, raws = [], [], []
    for i, tile in enumerate(tiles):
        enc = encode_tile_full(tile, config, weights, quant, i)
        payloads.append(len(enc.payload))
        raws.append(enc.raw_len)
        decoded.append((i, decode_tile_full(enc, weights, (tile.height, tile.width), tile.pattern)))
    return assemble_canvas(decoded, grid, fill_value, scene.frame.pattern), payloads, raws


def profile_offline(
    corpus: Sequence[SyntheticScene],
    weights: CodecWeights,
    detector: Callable[[RgbFrame], list[BoundingBox]] = detect,
    tx_threshold: float = 0.025,
    grid_kwargs: Mapping | None = None,
    quant: Mapping[int, QuantParams] | None = None,
) -> Profile:
    if not corpus:
        raise ValueError("profiling needs a non-empty corpus")
    grid = TileGrid.for_frame(corpus[0].frame, **(grid_kwargs or {}))
    rows = []
    for cfg in CONFIGS:
        q = (quant or {}).get(cfg.id, QuantParams(0.0, 255.0))
        dets, truths, frame_bytes, tile_bytes, raw_bytes, errors = [], [], [], [], [], []
        for scene in corpus:
            canvas, payloads, raws = roundtrip_frame(scene, cfg, weights, grid, q)
            dets.append(detector(demosaic_bilinear(canvas)))
            truths.append(scene.truth)
            frame_bytes.append(sum(payloads))
            tile_bytes.extend(payloads)
            raw_bytes.append(sum(raws))
            errors.append(mse(canvas, scene.frame))
        result = evaluate(dets, truths)
        rows.append(
            ParetoRow(
                cfg,
                result.map,
                result.f1,
                float(np.mean(frame_bytes)),
                float(np.mean(tile_bytes)),
                float(np.mean(raw_bytes)),
                float(np.mean(errors)),
            )
        )
    lut = build_lut({r.config.id: (r.map, r.mean_tile_bytes) for r in rows}, tx_threshold)
    return Profile(lut, rows)
