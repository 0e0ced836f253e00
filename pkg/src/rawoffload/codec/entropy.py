"""Lossless back-end: raw DEFLATE streams (LZ77 + canonical Huffman)."""

from __future__ import annotations

import zlib

LEVEL = 6
_RAW_DEFLATE = -15  # negative wbits: no zlib header or checksum, 32 KiB window


def entropy_encode(data: bytes) -> bytes:
    comp = zlib.compressobj(LEVEL, zlib.DEFLATED, _RAW_DEFLATE)
    return comp.compress(bytes(data)) + comp.flush()


def entropy_decode(data: bytes, expected_len: int) -> bytes:
    decomp = zlib.decompressobj(_RAW_DEFLATE)
    try:
        out = decomp.decompress(bytes(data), expected_len + 1)
    except zlib.error as exc:
        raise ValueError(f"corrupt DEFLATE stream: {exc}") from exc
    if not decomp.eof:
        raise ValueError("DEFLATE stream truncated or longer than expected")
    if decomp.unused_data:
        raise ValueError("trailing bytes after DEFLATE stream")
    if len(out) != expected_len:
        raise ValueError(f"DEFLATE stream decoded to {len(out)} bytes, expected {expected_len}")
    return out
