"""Minimal PNG codec for 8/16-bit grayscale, RGB and RGBA rasters.

Writing always uses filter type 0 and a fixed zlib level so output bytes
are deterministic; reading understands all five scanline filters but not
interlacing or palettes.  16-bit samples are big-endian per the format.
"""

from __future__ import annotations

import struct
import zlib

import numpy as np

_SIGNATURE = b"\x89PNG\r\n\x1a\n"
_COLOR_CHANNELS = {0: 1, 2: 3, 4: 2, 6: 4}


def _chunk(tag: bytes, payload: bytes) -> bytes:
    return (
        struct.pack(">I", len(payload))
        + tag
        + payload
        + struct.pack(">I", zlib.crc32(tag + payload) & 0xFFFFFFFF)
    )


def write_png(path, array: np.ndarray) -> None:
    """Write a (H, W[, C]) uint8/uint16 array as a PNG file."""
    arr = np.asarray(array)
    if arr.dtype == np.uint8:
        depth = 8
    elif arr.dtype == np.uint16:
        depth = 16
    else:
        raise ValueError(f"unsupported dtype {arr.dtype}; use uint8 or uint16")
    if arr.ndim == 2:
        channels = 1
    elif arr.ndim == 3 and arr.shape[2] in (1, 2, 3, 4):
        channels = arr.shape[2]
    else:
        raise ValueError(f"unsupported array shape {arr.shape}")
    color_type = {1: 0, 2: 4, 3: 2, 4: 6}[channels]
    h, w = arr.shape[:2]
    ihdr = struct.pack(">IIBBBBB", w, h, depth, color_type, 0, 0, 0)
    data = arr.reshape(h, -1)
    if depth == 16:
        data = data.astype(">u2")
    raw = b"".join(b"\x00" + data[row].tobytes() for row in range(h))
    payload = zlib.compress(raw, 6)
    with open(path, "wb") as fh:
        fh.write(_SIGNATURE)
        fh.write(_chunk(b"IHDR", ihdr))
        fh.write(_chunk(b"IDAT", payload))
        fh.write(_chunk(b"IEND", b""))


def _paeth(a: int, b: int, c: int) -> int:
    p = a + b - c
    pa, pb, pc = abs(p - a), abs(p - b), abs(p - c)
    if pa <= pb and pa <= pc:
        return a
    if pb <= pc:
        return b
    return c


def _unfilter(raw: bytes, h: int, stride: int, bpp: int) -> bytearray:
    out = bytearray(h * stride)
    prior = bytearray(stride)
    pos = 0
    for row in range(h):
        ftype = raw[pos]
        pos += 1
        line = bytearray(raw[pos : pos + stride])
        pos += stride
        if ftype == 1:
            for i in range(bpp, stride):
                line[i] = (line[i] + line[i - bpp]) & 0xFF
        elif ftype == 2:
            for i in range(stride):
                line[i] = (line[i] + prior[i]) & 0xFF
        elif ftype == 3:
            for i in range(stride):
                left = line[i - bpp] if i >= bpp else 0
                line[i] = (line[i] + ((left + prior[i]) >> 1)) & 0xFF
        elif ftype == 4:
            for i in range(stride):
                left = line[i - bpp] if i >= bpp else 0
                upleft = prior[i - bpp] if i >= bpp else 0
                line[i] = (line[i] + _paeth(left, prior[i], upleft)) & 0xFF
        elif ftype != 0:
            raise ValueError(f"unknown PNG filter type {ftype}")
        out[row * stride : (row + 1) * stride] = line
        prior = line
    return out


def read_png(path) -> np.ndarray:
    """Read a PNG file into a (H, W) or (H, W, C) uint8/uint16 array."""
    with open(path, "rb") as fh:
        blob = fh.read()
    if blob[:8] != _SIGNATURE:
        raise ValueError(f"{path}: not a PNG file")
    pos = 8
    ihdr = None
    idat = []
    while pos < len(blob):
        if pos + 8 > len(blob):
            raise ValueError(f"{path}: truncated chunk header")
        (length,) = struct.unpack(">I", blob[pos : pos + 4])
        tag = blob[pos + 4 : pos + 8]
        payload = blob[pos + 8 : pos + 8 + length]
        if len(payload) != length:
            raise ValueError(f"{path}: truncated {tag!r} chunk")
        pos += 12 + length
        if tag == b"IHDR":
            ihdr = struct.unpack(">IIBBBBB", payload)
        elif tag == b"IDAT":
            idat.append(payload)
        elif tag == b"IEND":
            break
    if ihdr is None:
        raise ValueError(f"{path}: missing IHDR")
    w, h, depth, color_type, _comp, _filt, interlace = ihdr
    if interlace:
        raise ValueError(f"{path}: interlaced PNG not supported")
    if color_type not in _COLOR_CHANNELS:
        raise ValueError(f"{path}: unsupported color type {color_type}")
    if depth not in (8, 16):
        raise ValueError(f"{path}: unsupported bit depth {depth}")
    channels = _COLOR_CHANNELS[color_type]
    bpp = channels * depth // 8
    stride = w * bpp
    raw = zlib.decompress(b"".join(idat))
    if len(raw) != h * (stride + 1):
        raise ValueError(f"{path}: payload size mismatch")
    flat = _unfilter(raw, h, stride, bpp)
    dtype = np.dtype(">u2") if depth == 16 else np.dtype(np.uint8)
    arr = np.frombuffer(bytes(flat), dtype=dtype).reshape(h, w * channels)
    arr = arr.astype(np.uint16 if depth == 16 else np.uint8)
    if channels > 1:
        arr = arr.reshape(h, w, channels)
    return arr
