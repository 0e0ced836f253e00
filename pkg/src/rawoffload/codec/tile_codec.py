from __future__ import annotations

import struct
from dataclasses import dataclass

from ..rawframe import BayerFrame, CfaPattern
from .entropy import entropy_decode, entropy_encode
from .network import CodecConfig, CodecWeights, config_by_id, decode, encode
from .quant import QuantParams, dequantize, quantize

# tile_index u8, config_id u8, lo f32, hi f32, raw_len u32, payload_len u32
TILE_HEADER = struct.Struct("<BBffII")


@dataclass(frozen=True)
class EncodedTile:
    tile_index: int
    config_id: int
    quant: QuantParams
    payload: bytes
    raw_len: int

    @property
    def config(self) -> CodecConfig:
        return config_by_id(self.config_id)

    def pack(self) -> bytes:
        head = TILE_HEADER.pack(
            self.tile_index, self.config_id, self.quant.lo, self.quant.hi, self.raw_len, len(self.payload)
        )
        return head + self.payload

    @property
    def wire_size(self) -> int:
        return TILE_HEADER.size + len(self.payload)

    @classmethod
    def unpack_from(cls, buf: bytes | memoryview, offset: int = 0) -> tuple[EncodedTile, int]:
        if offset + TILE_HEADER.size > len(buf):
            raise ValueError("truncated tile record header")
        index, config_id, lo, hi, raw_len, payload_len = TILE_HEADER.unpack_from(buf, offset)
        start = offset + TILE_HEADER.size
        end = start + payload_len
        if end > len(buf):
            raise ValueError(f"tile {index} payload runs {end - len(buf)} bytes past the buffer")
        config_by_id(config_id)
        tile = cls(index, config_id, QuantParams(lo, hi), bytes(buf[start:end]), raw_len)
        return tile, end


def encode_tile_full(
    tile: BayerFrame,
    config: CodecConfig,
    weights: CodecWeights,
    q: QuantParams,
    tile_index: int = 0,
) -> EncodedTile:
    raw = quantize(encode(tile, config, weights), q)
    return EncodedTile(tile_index, config.id, q, entropy_encode(raw), len(raw))


def decode_tile_full(
    encoded: EncodedTile,
    weights: CodecWeights,
    tile_shape: tuple[int, int],
    pattern: CfaPattern = CfaPattern.RGGB,
) -> BayerFrame:
    """``tile_shape`` is (height, width) of the source tile."""
    config = encoded.config
    dims = config.feature_shape(*tile_shape)
    if encoded.raw_len != dims[0] * dims[1] * dims[2]:
        raise ValueError(f"tile {encoded.tile_index}: raw_len {encoded.raw_len} does not fit dims {dims}")
    raw = entropy_decode(encoded.payload, encoded.raw_len)
    return decode(dequantize(raw, encoded.quant, dims), config, weights, pattern)
