"""Model checkpoint files.

Layout (little-endian):

    b"MWC1"
    u16 len, architecture tag (utf-8)
    u16 len, hyperparameters as ``key=value`` pairs joined by ``;``
    u32 tensor count
    per tensor: u16 len, name (utf-8), u8 ndim, u32 * ndim extents
    all tensor values as float64, in the order declared above

Parameters come first in declaration order, then batch-norm running
statistics (named ``buffer:<name>``).
"""

from __future__ import annotations

import io
import os
import struct
from pathlib import Path

import numpy as np

from ..audio_io import atomic_write_bytes
from ..errors import DataError
from .models import SequenceClassifier, build_model

MAGIC = b"MWC1"


def _put_str(buf: io.BytesIO, s: str) -> None:
    raw = s.encode("utf-8")
    buf.write(struct.pack("<H", len(raw)))
    buf.write(raw)


def _get_str(view: memoryview, pos: int) -> tuple[str, int]:
    (n,) = struct.unpack_from("<H", view, pos)
    pos += 2
    return bytes(view[pos:pos + n]).decode("utf-8"), pos + n


def encode_checkpoint(model: SequenceClassifier) -> bytes:
    buf = io.BytesIO()
    buf.write(MAGIC)
    _put_str(buf, model.arch)
    _put_str(buf, ";".join(f"{k}={v}" for k, v in model.hyperparameters().items()))
    tensors = model.state_arrays()
    buf.write(struct.pack("<I", len(tensors)))
    for name, arr in tensors.items():
        _put_str(buf, name)
        buf.write(struct.pack("<B", arr.ndim))
        buf.write(struct.pack(f"<{arr.ndim}I", *arr.shape))
    for arr in tensors.values():
        buf.write(np.ascontiguousarray(arr, dtype="<f8").tobytes())
    return buf.getvalue()


def save_checkpoint(model: SequenceClassifier, path: str | os.PathLike) -> None:
    atomic_write_bytes(path, encode_checkpoint(model))


def _parse_hyper(text: str) -> dict:
    out = {}
    for item in filter(None, text.split(";")):
        key, _, value = item.partition("=")
        if key == "head_widths":
            out[key] = tuple(int(v) for v in value.split(",") if v)
        elif key == "dropout":
            out[key] = float(value)
        else:
            out[key] = int(value)
    return out


def decode_checkpoint(raw: bytes, source: str = "<bytes>") -> SequenceClassifier:
    view = memoryview(raw)
    if bytes(view[:4]) != MAGIC:
        raise DataError(f"{source}: not a model checkpoint (bad magic)")
    try:
        arch, pos = _get_str(view, 4)
        hyper_text, pos = _get_str(view, pos)
        (count,) = struct.unpack_from("<I", view, pos)
        pos += 4
        shapes = []
        for _ in range(count):
            name, pos = _get_str(view, pos)
            (ndim,) = struct.unpack_from("<B", view, pos)
            pos += 1
            dims = struct.unpack_from(f"<{ndim}I", view, pos)
            pos += 4 * ndim
            shapes.append((name, dims))
        hyper = _parse_hyper(hyper_text)
        model = build_model(arch, **hyper)
        state = {}
        for name, dims in shapes:
            n = int(np.prod(dims, dtype=np.int64))
            state[name] = np.frombuffer(raw, dtype="<f8", count=n, offset=pos).reshape(dims).astype(np.float64)
            pos += 8 * n
    except (struct.error, ValueError, TypeError) as exc:
        raise DataError(f"{source}: corrupt checkpoint ({exc})") from exc
    expected = model.state_arrays()
    if set(state) != set(expected) or any(state[k].shape != expected[k].shape for k in state):
        raise DataError(f"{source}: checkpoint tensors do not match a {arch} model")
    if pos != len(raw):
        raise DataError(f"{source}: {len(raw) - pos} trailing bytes in checkpoint")
    model.load_state(state)
    return model


def load_checkpoint(path: str | os.PathLike) -> SequenceClassifier:
    path = Path(path)
    try:
        raw = path.read_bytes()
    except FileNotFoundError:
        raise DataError(f"{path}: checkpoint not found") from None
    return decode_checkpoint(raw, str(path))
