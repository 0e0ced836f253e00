"""Asymmetric tile codec: one strided patch convolution on the client, a
per-configuration upsampling head plus a shared residual trunk on the server."""

from __future__ import annotations

import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..rawframe import BayerFrame, CfaPattern, PlanarFrame, disassemble, reassemble

TRUNK_WIDTH = 16
TRUNK_STAGES = 3


@dataclass(frozen=True)
class CodecConfig:
    id: int
    stride: int
    channels: int

    def feature_shape(self, tile_height: int, tile_width: int) -> tuple[int, int, int]:
        step = 2 * self.stride
        if tile_height % step or tile_width % step:
            raise ValueError(
                f"tile {tile_width}x{tile_height} not divisible by {step} for config {self}"
            )
        return self.channels, tile_height // step, tile_width // step

    def raw_len(self, tile_height: int, tile_width: int) -> int:
        c, h, w = self.feature_shape(tile_height, tile_width)
        return c * h * w

    def __str__(self) -> str:
        return f"({self.stride},{self.channels})"


# id order fixed: 0 is the richest representation, 3 the leanest
CONFIGS: tuple[CodecConfig, ...] = (
    CodecConfig(0, 2, 8),
    CodecConfig(1, 2, 4),
    CodecConfig(2, 4, 8),
    CodecConfig(3, 4, 4),
)


def config_by_id(config_id: int) -> CodecConfig:
    if not 0 <= config_id < len(CONFIGS):
        raise ValueError(f"unknown codec config id {config_id}")
    return CONFIGS[config_id]


def config_for(stride: int, channels: int) -> CodecConfig:
    for cfg in CONFIGS:
        if (cfg.stride, cfg.channels) == (stride, channels):
            return cfg
    raise ValueError(f"no codec config with stride {stride} and {channels} channels")


@dataclass
class ResidualStage:
    w1: np.ndarray  # (T, T, 3, 3)
    b1: np.ndarray  # (T,)
    w2: np.ndarray
    b2: np.ndarray

    @property
    def is_identity(self) -> bool:
        return not self.w2.any() and not self.b2.any()


@dataclass
class EncoderWeights:
    kernels: dict[int, np.ndarray]  # config id -> (c, 4, s, s)
    biases: dict[int, np.ndarray]  # config id -> (c,)


@dataclass
class DecoderWeights:
    head_kernels: dict[int, np.ndarray]  # config id -> (c, T, s, s)
    head_biases: dict[int, np.ndarray]  # config id -> (T,)
    trunk: list[ResidualStage] = field(default_factory=list)
    proj_weight: np.ndarray = field(default_factory=lambda: np.zeros((4, TRUNK_WIDTH), np.float32))
    proj_bias: np.ndarray = field(default_factory=lambda: np.zeros(4, np.float32))

    @property
    def trunk_width(self) -> int:
        return self.proj_weight.shape[1]


@dataclass
class CodecWeights:
    encoder: EncoderWeights
    decoder: DecoderWeights

    def tensors(self) -> list[np.ndarray]:
        """Every parameter tensor in file order."""
        out = []
        for cfg in CONFIGS:
            out += [self.encoder.kernels[cfg.id], self.encoder.biases[cfg.id]]
            out += [self.decoder.head_kernels[cfg.id], self.decoder.head_biases[cfg.id]]
        for stage in self.decoder.trunk:
            out += [stage.w1, stage.b1, stage.w2, stage.b2]
        out += [self.decoder.proj_weight, self.decoder.proj_bias]
        return out

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, CodecWeights):
            return NotImplemented
        mine, theirs = self.tensors(), other.tensors()
        return len(mine) == len(theirs) and all(
            a.shape == b.shape and a.dtype == b.dtype and np.array_equal(a, b)
            for a, b in zip(mine, theirs)
        )


def _half_masks(stride: int) -> tuple[np.ndarray, np.ndarray]:
    rows = np.arange(stride)[:, None] < stride // 2
    top = np.broadcast_to(rows, (stride, stride))
    return top, ~top


def default_weights(trunk_width: int = TRUNK_WIDTH, trunk_stages: int = TRUNK_STAGES) -> CodecWeights:
    """Untrained parameters that already make a usable codec.

    Four-channel configs average each CFA plane over the stride patch;
    eight-channel configs average the top and bottom half-patches separately.
    Every kernel is a box filter, so a uniform tile encodes to that value in
    every channel. Heads invert by nearest-neighbour replication, the trunk is
    identity and the projection reads the first four trunk channels.
    """
    if trunk_width < 4:
        raise ValueError("trunk must be at least 4 channels wide")
    enc_k, enc_b, head_k, head_b = {}, {}, {}, {}
    for cfg in CONFIGS:
        s, c = cfg.stride, cfg.channels
        k = np.zeros((c, 4, s, s), np.float32)
        hk = np.zeros((c, trunk_width, s, s), np.float32)
        if c == 4:
            for p in range(4):
                k[p, p] = 1.0 / (s * s)
                hk[p, p] = 1.0
        else:
            top, bottom = _half_masks(s)
            for p in range(4):
                k[p, p][top] = 2.0 / (s * s)
                k[4 + p, p][bottom] = 2.0 / (s * s)
                hk[p, p][top] = 1.0
                hk[4 + p, p][bottom] = 1.0
        enc_k[cfg.id], enc_b[cfg.id] = k, np.zeros(c, np.float32)
        head_k[cfg.id], head_b[cfg.id] = hk, np.zeros(trunk_width, np.float32)
    trunk = [
        ResidualStage(
            np.zeros((trunk_width, trunk_width, 3, 3), np.float32),
            np.zeros(trunk_width, np.float32),
            np.zeros((trunk_width, trunk_width, 3, 3), np.float32),
            np.zeros(trunk_width, np.float32),
        )
        for _ in range(trunk_stages)
    ]
    proj = np.zeros((4, trunk_width), np.float32)
    proj[:, :4] = np.eye(4, dtype=np.float32)
    return CodecWeights(
        EncoderWeights(enc_k, enc_b),
        DecoderWeights(head_k, head_b, trunk, proj, np.zeros(4, np.float32)),
    )


def encode(tile: BayerFrame, config: CodecConfig, weights: EncoderWeights | CodecWeights) -> np.ndarray:
    """Feature map of shape (channels, H / 2s, W / 2s), float64."""
    if isinstance(weights, CodecWeights):
        weights = weights.encoder
    c, fh, fw = config.feature_shape(tile.height, tile.width)
    s = config.stride
    planes = disassemble(tile).planes.astype(np.float64)
    patches = planes.reshape(4, fh, s, fw, s)
    kernel = weights.kernels[config.id].astype(np.float64)
    feat = np.einsum("piajb,cpab->cij", patches, kernel, optimize=True)
    return feat + weights.biases[config.id].astype(np.float64)[:, None, None]


def _conv3x3(x: np.ndarray, w: np.ndarray, b: np.ndarray) -> np.ndarray:
    padded = np.pad(x, ((0, 0), (1, 1), (1, 1)))
    windows = np.lib.stride_tricks.sliding_window_view(padded, (3, 3), axis=(1, 2))
    return np.einsum("chwij,ocij->ohw", windows, w.astype(np.float64), optimize=True) + b[:, None, None]


def decode(
    feat: np.ndarray,
    config: CodecConfig,
    weights: DecoderWeights | CodecWeights,
    pattern: CfaPattern = CfaPattern.RGGB,
) -> BayerFrame:
    if isinstance(weights, CodecWeights):
        weights = weights.decoder
    feat = np.asarray(feat, dtype=np.float64)
    if feat.ndim != 3 or feat.shape[0] != config.channels:
        raise ValueError(f"feature map {feat.shape} does not match config {config}")
    s = config.stride
    _, fh, fw = feat.shape
    head = weights.head_kernels[config.id].astype(np.float64)
    x = np.einsum("cij,ctab->tiajb", feat, head, optimize=True).reshape(-1, fh * s, fw * s)
    x = x + weights.head_biases[config.id].astype(np.float64)[:, None, None]
    for stage in weights.trunk:
        if stage.is_identity:
            continue
        hidden = np.maximum(_conv3x3(x, stage.w1, stage.b1.astype(np.float64)), 0.0)
        x = x + _conv3x3(hidden, stage.w2, stage.b2.astype(np.float64))
    planes = np.einsum("thw,pt->phw", x, weights.proj_weight.astype(np.float64), optimize=True)
    planes = planes + weights.proj_bias.astype(np.float64)[:, None, None]
    planes = np.clip(np.floor(planes + 0.5), 0, 255).astype(np.uint8)
    return reassemble(PlanarFrame(planes), pattern)


# Weight file: "ABWT", version, config table, trunk shape, then tensor records
WEIGHTS_MAGIC = b"ABWT"
WEIGHTS_VERSION = 1


def _expected_shapes(trunk_width: int, trunk_stages: int) -> list[tuple[int, ...]]:
    shapes: list[tuple[int, ...]] = []
    for cfg in CONFIGS:
        s, c = cfg.stride, cfg.channels
        shapes += [(c, 4, s, s), (c,), (c, trunk_width, s, s), (trunk_width,)]
    t = trunk_width
    shapes += [(t, t, 3, 3), (t,), (t, t, 3, 3), (t,)] * trunk_stages
    shapes += [(4, t), (4,)]
    return shapes


def save_weights(path: str | Path, weights: CodecWeights) -> None:
    Path(path).write_bytes(dump_weights(weights))


def dump_weights(weights: CodecWeights) -> bytes:
    out = bytearray(WEIGHTS_MAGIC)
    out += struct.pack("<BB", WEIGHTS_VERSION, len(CONFIGS))
    for cfg in CONFIGS:
        out += struct.pack("<BBB", cfg.id, cfg.stride, cfg.channels)
    out += struct.pack("<HB", weights.decoder.trunk_width, len(weights.decoder.trunk))
    for tensor in weights.tensors():
        arr = np.ascontiguousarray(tensor, dtype="<f4")
        out += struct.pack("<B", arr.ndim)
        out += struct.pack(f"<{arr.ndim}I", *arr.shape)
        out += arr.tobytes()
    return bytes(out)


def load_weights(path: str | Path) -> CodecWeights:
    return parse_weights(Path(path).read_bytes())


def parse_weights(data: bytes) -> CodecWeights:
    view = memoryview(data)
    pos = 0

    def take(fmt: str) -> tuple:
        nonlocal pos
        size = struct.calcsize(fmt)
        if pos + size > len(view):
            raise ValueError("weight file truncated")
        vals = struct.unpack_from(fmt, view, pos)
        pos += size
        return vals

    if bytes(view[:4]) != WEIGHTS_MAGIC:
        raise ValueError("not a weight file (bad magic)")
    pos = 4
    version, n_configs = take("<BB")
    if version != WEIGHTS_VERSION:
        raise ValueError(f"unsupported weight file version {version}")
    if n_configs != len(CONFIGS):
        raise ValueError(f"weight file lists {n_configs} configs, expected {len(CONFIGS)}")
    for cfg in CONFIGS:
        entry = take("<BBB")
        if entry != (cfg.id, cfg.stride, cfg.channels):
            raise ValueError(f"config table entry {entry} contradicts {cfg.id}:{cfg}")
    trunk_width, trunk_stages = take("<HB")
    tensors = []
    for expected in _expected_shapes(trunk_width, trunk_stages):
        (rank,) = take("<B")
        dims = take(f"<{rank}I")
        if dims != expected:
            raise ValueError(f"tensor dims {dims} do not match expected {expected}")
        count = int(np.prod(dims))
        if pos + 4 * count > len(view):
            raise ValueError("weight file truncated")
        arr = np.frombuffer(view, dtype="<f4", count=count, offset=pos).reshape(dims).astype(np.float32)
        pos += 4 * count
        if not np.all(np.isfinite(arr)):
            raise ValueError("weight file contains non-finite values")
        tensors.append(arr)
    if pos != len(view):
        raise ValueError(f"{len(view) - pos} trailing bytes after weight tensors")

    it = iter(tensors)
    enc_k, enc_b, head_k, head_b = {}, {}, {}, {}
    for cfg in CONFIGS:
        enc_k[cfg.id], enc_b[cfg.id] = next(it), next(it)
        head_k[cfg.id], head_b[cfg.id] = next(it), next(it)
    trunk = [ResidualStage(next(it), next(it), next(it), next(it)) for _ in range(trunk_stages)]
    proj_w, proj_b = next(it), next(it)
    return CodecWeights(EncoderWeights(enc_k, enc_b), DecoderWeights(head_k, head_b, trunk, proj_w, proj_b))
