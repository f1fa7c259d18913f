"""FMAP float raster files for depth, transmission and airlight maps.

Layout: b"FMAP" | u32 version | u32 height | u32 width | u32 channels |
height * width * channels float32 values, row-major, channel-last. Every field
is little-endian; a version that only reads back as 1 byte-swapped marks a
big-endian file.
"""

import struct
from pathlib import Path
from typing import Union

import numpy as np

from fastnet_dehazing.errors import FmapFormatError, ImageNotFoundError, ImageWriteError

MAGIC = b"FMAP"
FORMAT_VERSION = 1
HEADER = struct.Struct("<4sIIII")

PathLike = Union[str, Path]


def encode_fmap(raster: np.ndarray) -> bytes:
    arr = np.asarray(raster)
    if arr.ndim == 2:
        arr = arr[:, :, None]
    if arr.ndim != 3:
        raise FmapFormatError(f"FMAP rasters are H x W or H x W x C, got shape {arr.shape}")
    height, width, channels = arr.shape
    payload = np.ascontiguousarray(arr, dtype="<f4").tobytes()
    return HEADER.pack(MAGIC, FORMAT_VERSION, height, width, channels) + payload


def decode_fmap(payload: bytes, source: str = "<bytes>") -> np.ndarray:
    """Return an H x W x C float32 array."""
    if len(payload) < HEADER.size:
        raise FmapFormatError(f"{source}: {len(payload)} bytes is shorter than the FMAP header")
    magic, version, height, width, channels = HEADER.unpack_from(payload)
    if magic != MAGIC:
        raise FmapFormatError(f"{source}: not an FMAP file (bad magic {magic!r})")
    if version != FORMAT_VERSION:
        if version == struct.unpack("<I", struct.pack(">I", FORMAT_VERSION))[0]:
            raise FmapFormatError(f"{source}: big-endian FMAP files are not supported")
        raise FmapFormatError(f"{source}: unsupported FMAP version {version}")
    expected = HEADER.size + 4 * height * width * channels
    if len(payload) != expected:
        raise FmapFormatError(
            f"{source}: payload length {len(payload)} does not match {height}x{width}x{channels} ({expected} bytes)"
        )
    values = np.frombuffer(payload, dtype="<f4", offset=HEADER.size)
    return values.reshape(height, width, channels).astype(np.float32)


def write_fmap(raster: np.ndarray, path: PathLike) -> None:
    path = Path(path)
    try:
        path.write_bytes(encode_fmap(raster))
    except OSError as e:
        raise ImageWriteError(f"Cannot write FMAP to {path}: {e}") from e


def read_fmap(path: PathLike) -> np.ndarray:
    path = Path(path)
    if not path.exists():
        raise ImageNotFoundError(f"No FMAP file at {path}")
    return decode_fmap(path.read_bytes(), str(path))
