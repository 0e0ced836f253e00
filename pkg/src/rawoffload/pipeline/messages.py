"""Client/server wire messages. Little-endian throughout."""

from __future__ import annotations

import struct
from dataclasses import dataclass, field

from ..codec.network import config_by_id
from ..codec.quant import QuantParams
from ..codec.tile_codec import EncodedTile
from ..rawframe import BoundingBox, CfaPattern

FRAME_MAGIC = b"ABFM"
RESULT_MAGIC = b"ABRS"
VERSION = 1

FLAG_KEY_FRAME = 0x01
_PATTERN_SHIFT = 1
_PATTERN_MASK = 0x06

# magic, version, frame_id u64, flags u8, config_id u8, lo f32, hi f32, tile_count u16
FRAME_HEADER = struct.Struct("<4sBQBBffH")
# magic, version, frame_id u64, status u8, count u16
RESULT_HEADER = struct.Struct("<4sBQBH")
# class u16, confidence f32, x, y, w, h f32
DETECTION = struct.Struct("<Hfffff")

STATUS_OK = 0
STATUS_ERROR = 1


class MessageError(ValueError):
    pass


@dataclass
class FrameMessage:
    frame_id: int
    config_id: int
    quant: QuantParams
    tiles: list[EncodedTile] = field(default_factory=list)
    key_frame: bool = False
    pattern: CfaPattern = CfaPattern.RGGB

    def serialize(self) -> bytes:
        flags = (FLAG_KEY_FRAME if self.key_frame else 0) | (int(self.pattern) << _PATTERN_SHIFT)
        head = FRAME_HEADER.pack(
            FRAME_MAGIC,
            VERSION,
            self.frame_id,
            flags,
            self.config_id,
            self.quant.lo,
            self.quant.hi,
            len(self.tiles),
        )
        return head + b"".join(t.pack() for t in self.tiles)

    @classmethod
    def deserialize(cls, data: bytes) -> FrameMessage:
        buf = memoryview(data)
        if len(buf) < FRAME_HEADER.size:
            raise MessageError("frame message truncated in header")
        magic, version, frame_id, flags, config_id, lo, hi, count = FRAME_HEADER.unpack_from(buf)
        if magic != FRAME_MAGIC:
            raise MessageError(f"bad frame magic {bytes(magic)!r}")
        if version != VERSION:
            raise MessageError(f"unsupported frame message version {version}")
        if flags & ~(FLAG_KEY_FRAME | _PATTERN_MASK):
            raise MessageError(f"unknown flag bits 0x{flags:02x}")
        try:
            config_by_id(config_id)
            quant = QuantParams(lo, hi)
        except ValueError as exc:
            raise MessageError(str(exc)) from exc
        tiles = []
        pos = FRAME_HEADER.size
        seen = set()
        for _ in range(count):
            try:
                tile, pos = EncodedTile.unpack_from(buf, pos)
            except ValueError as exc:
                raise MessageError(str(exc)) from exc
            if tile.tile_index in seen:
                raise MessageError(f"tile {tile.tile_index} appears twice")
            if tile.config_id != config_id or tile.quant != quant:
                raise MessageError(f"tile {tile.tile_index} disagrees with the frame codec settings")
            seen.add(tile.tile_index)
            tiles.append(tile)
        if pos != len(buf):
            raise MessageError(f"{len(buf) - pos} unexpected trailing bytes after {count} tiles")
        pattern = CfaPattern((flags & _PATTERN_MASK) >> _PATTERN_SHIFT)
        return cls(frame_id, config_id, quant, tiles, bool(flags & FLAG_KEY_FRAME), pattern)

    @staticmethod
    def peek_frame_id(data: bytes) -> int | None:
        if len(data) >= FRAME_HEADER.size and data[:4] == FRAME_MAGIC:
            return FRAME_HEADER.unpack_from(data)[2]
        return None


@dataclass
class ResultMessage:
    frame_id: int
    detections: list[BoundingBox] = field(default_factory=list)
    status: int = STATUS_OK

    @property
    def ok(self) -> bool:
        return self.status == STATUS_OK

    def serialize(self) -> bytes:
        out = [RESULT_HEADER.pack(RESULT_MAGIC, VERSION, self.frame_id, self.status, len(self.detections))]
        out += [DETECTION.pack(d.class_id, d.confidence, d.x, d.y, d.w, d.h) for d in self.detections]
        return b"".join(out)

    @classmethod
    def deserialize(cls, data: bytes) -> ResultMessage:
        if len(data) < RESULT_HEADER.size:
            raise MessageError("result message truncated in header")
        magic, version, frame_id, status, count = RESULT_HEADER.unpack_from(data)
        if magic != RESULT_MAGIC:
            raise MessageError(f"bad result magic {magic!r}")
        if version != VERSION:
            raise MessageError(f"unsupported result message version {version}")
        if status not in (STATUS_OK, STATUS_ERROR):
            raise MessageError(f"unknown result status {status}")
        if len(data) != RESULT_HEADER.size + count * DETECTION.size:
            raise MessageError(f"result body does not hold exactly {count} detections")
        dets = []
        for i in range(count):
            cls_id, conf, x, y, w, h = DETECTION.unpack_from(data, RESULT_HEADER.size + i * DETECTION.size)
            try:
                dets.append(BoundingBox(cls_id, x, y, w, h, conf))
            except ValueError as exc:
                raise MessageError(f"detection {i}: {exc}") from exc
        return cls(frame_id, dets, status)
