"""Client-side frame encoding and the edge server's request handler."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Callable, Mapping

import numpy as np

from ..codec.network import CONFIGS, CodecWeights
from ..codec.quant import QuantParams
from ..codec.tile_codec import decode_tile_full, encode_tile_full
from ..codec.tiles import DEFAULT_FILL, TileGrid, assemble_canvas
from ..controller import TransmissionPlan
from ..rawframe import BayerFrame, BoundingBox, RgbFrame, crop, demosaic_bilinear
from ..evaluation.detector import detect
from .messages import STATUS_ERROR, FrameMessage, MessageError, ResultMessage

log = logging.getLogger(__name__)

Detector = Callable[[RgbFrame], list[BoundingBox]]

# default-weight features are convex mixes of 8-bit samples
DEFAULT_QUANT = QuantParams(0.0, 255.0)


def default_quant_table() -> dict[int, QuantParams]:
    return {c.id: DEFAULT_QUANT for c in CONFIGS}


@dataclass
class FrameEncoder:
    weights: CodecWeights
    grid: TileGrid
    quant: Mapping[int, QuantParams] = field(default_factory=default_quant_table)

    def encode(self, frame: BayerFrame, plan: TransmissionPlan, frame_id: int) -> FrameMessage:
        cfg = plan.config
        q = self.quant[cfg.id]
        tiles = []
        for index in plan.tiles:
            r = self.grid.tile(index)
            tile = crop(frame, r.x, r.y, r.w, r.h)
            tiles.append(encode_tile_full(tile, cfg, self.weights, q, index))
        return FrameMessage(frame_id, cfg.id, q, tiles, plan.is_key_frame, frame.pattern)


def reconstruct(
    msg: FrameMessage, weights: CodecWeights, grid: TileGrid, fill_value: int = DEFAULT_FILL
) -> BayerFrame:
    decoded = []
    for t in msg.tiles:
        r = grid.tile(t.tile_index)
        decoded.append((t.tile_index, decode_tile_full(t, weights, (r.h, r.w), msg.pattern)))
    return assemble_canvas(decoded, grid, fill_value, msg.pattern)


def _snap(box: BoundingBox) -> BoundingBox:
    f = lambda v: float(np.float32(v))  # noqa: E731
    return BoundingBox(box.class_id, f(box.x), f(box.y), f(box.w), f(box.h), f(box.confidence))


@dataclass
class EdgeServer:
    """Decode, reassemble, demosaic, detect; one request at a time."""

    weights: CodecWeights
    grid: TileGrid
    detector: Detector = detect
    fill_value: int = DEFAULT_FILL
    last_canvas: BayerFrame | None = field(default=None, repr=False)

    def process(self, msg: FrameMessage) -> ResultMessage:
        for t in msg.tiles:
            if not 0 <= t.tile_index < self.grid.tile_count:
                raise MessageError(f"tile index {t.tile_index} outside the grid")
        canvas = reconstruct(msg, self.weights, self.grid, self.fill_value)
        self.last_canvas = canvas
        if not msg.tiles:
            return ResultMessage(msg.frame_id, [])
        boxes = self.detector(demosaic_bilinear(canvas))
        return ResultMessage(msg.frame_id, [_snap(b) for b in boxes])

    def handle(self, data: bytes) -> bytes:
        try:
            msg = FrameMessage.deserialize(data)
            return self.process(msg).serialize()
        except (MessageError, ValueError) as exc:
            frame_id = FrameMessage.peek_frame_id(data)
            log.warning("rejecting frame %s: %s", frame_id, exc)
            return ResultMessage(frame_id or 0, [], STATUS_ERROR).serialize()

