from ..rawframe import mse
from .distill import LossReport, distill_weights, kd_loss
from .entropy import entropy_decode, entropy_encode
from .network import (
    CONFIGS,
    CodecConfig,
    CodecWeights,
    DecoderWeights,
    EncoderWeights,
    ResidualStage,
    config_by_id,
    config_for,
    decode,
    default_weights,
    dump_weights,
    encode,
    load_weights,
    parse_weights,
    save_weights,
)
from .quant import QuantParams, calibrate, dequantize, quantize
from .tile_codec import TILE_HEADER, EncodedTile, decode_tile_full, encode_tile_full
from .tiles import DEFAULT_FILL, DEFAULT_OVERLAP, Rect, TileGrid, assemble_canvas, partition

__all__ = [
    "CONFIGS",
    "CodecConfig",
    "CodecWeights",
    "DEFAULT_FILL",
    "DEFAULT_OVERLAP",
    "DecoderWeights",
    "EncodedTile",
    "EncoderWeights",
    "LossReport",
    "QuantParams",
    "Rect",
    "ResidualStage",
    "TILE_HEADER",
    "TileGrid",
    "assemble_canvas",
    "calibrate",
    "config_by_id",
    "config_for",
    "decode",
    "decode_tile_full",
    "default_weights",
    "dequantize",
    "distill_weights",
    "dump_weights",
    "encode",
    "encode_tile_full",
    "entropy_decode",
    "entropy_encode",
    "kd_loss",
    "load_weights",
    "mse",
    "parse_weights",
    "partition",
    "quantize",
    "save_weights",
]
