"""Binary per-clip feature cache.

Layout: ``b"MWF1"``, then little-endian u32 rows, u32 cols, u32 label, then
rows*cols little-endian float32 values in row-major order.
"""

from __future__ import annotations

import os
import struct
from pathlib import Path

import numpy as np

from ..audio_io import atomic_write_bytes
from ..errors import DataError

MAGIC = b"MWF1"
_HEADER = struct.Struct("<4sIII")


def encode_features(data: np.ndarray, label: int) -> bytes:
    rows, cols = data.shape
    body = np.ascontiguousarray(data, dtype="<f4").tobytes()
    return _HEADER.pack(MAGIC, rows, cols, label) + body


def write_features(path: str | os.PathLike, data: np.ndarray, label: int) -> None:
    atomic_write_bytes(path, encode_features(data, label))


def read_features(path: str | os.PathLike) -> tuple[np.ndarray, int]:
    path = Path(path)
    try:
        raw = path.read_bytes()
    except FileNotFoundError:
        raise DataError(f"{path}: feature cache file missing (run `moodwave extract` first)") from None
    if len(raw) < _HEADER.size:
        raise DataError(f"{path}: truncated feature cache header")
    magic, rows, cols, label = _HEADER.unpack_from(raw)
    if magic != MAGIC:
        raise DataError(f"{path}: bad magic {magic!r}, expected {MAGIC!r}")
    expected = _HEADER.size + 4 * rows * cols
    if len(raw) != expected:
        raise DataError(f"{path}: expected {expected} bytes for {rows}x{cols}, found {len(raw)}")
    data = np.frombuffer(raw, dtype="<f4", offset=_HEADER.size).reshape(rows, cols)
    return data.astype(np.float64), int(label)
