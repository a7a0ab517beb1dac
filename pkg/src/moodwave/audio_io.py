"""Audio decoding, resampling, synthesis and dataset manifests."""

from __future__ import annotations

import csv
import io
import os
import tempfile
import warnings
from dataclasses import dataclass, field
from functools import lru_cache
from pathlib import Path

import numpy as np
from scipy.io import wavfile
from scipy.special import i0

from .errors import DataError

CANONICAL_SR = 22050
QUADRANT_NAMES = ("Q1", "Q2", "Q3", "Q4")

RESAMPLE_TAPS = 64
KAISER_BETA = 8.6


@dataclass(frozen=True)
class AudioClip:
    samples: np.ndarray
    sample_rate: int
    source_id: str = ""

    def __post_init__(self):
        samples = np.asarray(self.samples, dtype=np.float64)
        if samples.ndim != 1:
            raise ValueError(f"expected mono samples, got shape {samples.shape}")
        if self.sample_rate <= 0:
            raise ValueError(f"sample_rate must be positive, got {self.sample_rate}")
        if not np.all(np.isfinite(samples)):
            raise ValueError(f"clip {self.source_id!r} has non-finite samples")
        if samples.size and np.max(np.abs(samples)) > 1.0:
            raise ValueError(f"clip {self.source_id!r} exceeds [-1, 1]")
        samples = samples.copy() if samples is self.samples else samples
        samples.flags.writeable = False
        object.__setattr__(self, "samples", samples)
        object.__setattr__(self, "sample_rate", int(self.sample_rate))

    @property
    def duration(self) -> float:
        return self.samples.size / self.sample_rate

    def __len__(self) -> int:
        return self.samples.size

    def with_samples(self, samples: np.ndarray, sample_rate: int | None = None, source_id: str | None = None) -> AudioClip:
        return AudioClip(
            np.clip(samples, -1.0, 1.0),
            self.sample_rate if sample_rate is None else sample_rate,
            self.source_id if source_id is None else source_id,
        )


# --------------------------------------------------------------------------- #
# WAV I/O


def load_wav(path: str | os.PathLike) -> AudioClip:
    """Decode a PCM/float WAV file to a mono clip with samples in [-1, 1].

    Integer formats are scaled by their full-scale value (16-bit: 1/32768),
    unsigned 8-bit is re-centred on 128, and stereo is mixed down by the
    channel mean.
    """
    path = Path(path)
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", wavfile.WavFileWarning)
            sr, data = wavfile.read(path)
    except FileNotFoundError:
        raise DataError(f"{path}: no such file") from None
    except (ValueError, OSError, EOFError) as exc:
        raise DataError(f"{path}: cannot decode WAV ({exc})") from exc

    if data.dtype == np.uint8:
        x = (data.astype(np.float64) - 128.0) / 128.0
    elif data.dtype == np.int16:
        x = data.astype(np.float64) / 32768.0
    elif data.dtype == np.int32:
        # scipy left-justifies 24-bit samples into int32, so one scale fits both
        x = data.astype(np.float64) / 2147483648.0
    elif data.dtype in (np.float32, np.float64):
        x = data.astype(np.float64)
    else:
        raise DataError(f"{path}: unsupported sample encoding {data.dtype}")

    if x.ndim == 2:
        if x.shape[1] > 2:
            raise DataError(f"{path}: {x.shape[1]} channels, only mono or stereo supported")
        x = x.mean(axis=1)
    if x.size == 0:
        raise DataError(f"{path}: zero-length audio stream")
    if not np.all(np.isfinite(x)):
        raise DataError(f"{path}: non-finite samples")
    return AudioClip(np.clip(x, -1.0, 1.0), int(sr), path.stem)


def wav_bytes(clip: AudioClip) -> bytes:
    pcm = np.clip(np.round(clip.samples * 32768.0), -32768, 32767).astype(np.int16)
    buf = io.BytesIO()
    wavfile.write(buf, clip.sample_rate, pcm)
    return buf.getvalue()


def write_wav(path: str | os.PathLike, clip: AudioClip) -> None:
    """Write a clip as 16-bit PCM. ``load_wav`` reads it back sample-exactly."""
    atomic_write_bytes(path, wav_bytes(clip))


def atomic_write_bytes(path: str | os.PathLike, payload: bytes) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(payload)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def atomic_write_text(path: str | os.PathLike, text: str) -> None:
    atomic_write_bytes(path, text.encode("utf-8"))


# --------------------------------------------------------------------------- #
# Resampling


def _kaiser(u: np.ndarray) -> np.ndarray:
    inside = np.abs(u) <= 1.0
    arg = np.sqrt(np.clip(1.0 - u * u, 0.0, None))
    return np.where(inside, i0(KAISER_BETA * arg) / i0(KAISER_BETA), 0.0)


_TABLE_RES = 4096


@lru_cache(maxsize=32)
def _kernel_table(cutoff: float) -> np.ndarray:
    half = RESAMPLE_TAPS // 2
    delta = np.arange(-half * _TABLE_RES, half * _TABLE_RES + 2) / _TABLE_RES
    table = cutoff * np.sinc(cutoff * delta) * _kaiser(delta / half)
    table.flags.writeable = False
    return table


def sinc_resample(x: np.ndarray, ratio: float, n_out: int | None = None, chunk: int = 32768) -> np.ndarray:
    """Band-limited interpolation of ``x`` at ``ratio`` output samples per input sample.

    Each output sample is a 64-tap Kaiser-windowed sinc sum over its input
    neighbourhood; the kernel is tabulated finely and linearly interpolated.
    When downsampling the sinc cutoff drops to the output Nyquist rate.
    """
    x = np.asarray(x, dtype=np.float64)
    if ratio <= 0:
        raise ValueError("ratio must be positive")
    if n_out is None:
        n_out = int(round(x.size * ratio))
    half = RESAMPLE_TAPS // 2
    table = _kernel_table(min(1.0, float(ratio)))
    offsets = np.arange(-half + 1, half + 1)
    xp = np.pad(x, (half, half + 1))
    out = np.empty(n_out)
    for start in range(0, n_out, chunk):
        pos = np.arange(start, min(start + chunk, n_out)) / ratio
        base = np.floor(pos).astype(np.int64)
        # delta = pos - (base + offset), always inside [-half, half]
        u = ((pos - base)[:, None] - offsets[None, :] + half) * _TABLE_RES
        iu = u.astype(np.int64)
        frac = u - iu
        weights = table[iu] * (1.0 - frac) + table[iu + 1] * frac
        vals = xp[np.clip(base, 0, x.size)[:, None] + offsets[None, :] + half]
        out[start:start + pos.size] = np.einsum("ij,ij->i", weights, vals)
    return out


def resample(clip: AudioClip, target_sr: int) -> AudioClip:
    if target_sr <= 0:
        raise ValueError(f"target_sr must be positive, got {target_sr}")
    if target_sr == clip.sample_rate:
        return clip
    y = sinc_resample(clip.samples, target_sr / clip.sample_rate)
    return clip.with_samples(y, sample_rate=target_sr)


def fix_duration(clip: AudioClip, seconds: float) -> AudioClip:
    """Truncate, or zero-pad at the tail, to exactly ``round(seconds * sr)`` samples."""
    if seconds <= 0:
        raise ValueError("seconds must be positive")
    n = int(round(seconds * clip.sample_rate))
    if n == clip.samples.size:
        return clip
    y = np.zeros(n)
    keep = min(n, clip.samples.size)
    y[:keep] = clip.samples[:keep]
    return clip.with_samples(y)


def load_clip(path: str | os.PathLike, sample_rate: int = CANONICAL_SR, seconds: float | None = None) -> AudioClip:
    """``load_wav`` followed by the canonical resample and optional duration fix."""
    clip = resample(load_wav(path), sample_rate)
    return fix_duration(clip, seconds) if seconds else clip


# --------------------------------------------------------------------------- #
# Synthesis


def synth_signal(
    kind: str,
    duration: float,
    sr: int = CANONICAL_SR,
    *,
    frequency: float | None = None,
    bpm: float | None = None,
    seed: int = 0,
    amplitude: float = 0.8,
) -> AudioClip:
    """Deterministic test signals: ``sine``, ``click_train``, ``white_noise`` or ``silence``."""
    n = int(round(duration * sr))
    if kind == "silence":
        y = np.zeros(n)
    elif kind == "sine":
        if frequency is None or frequency <= 0:
            raise ValueError("sine needs a positive frequency")
        y = amplitude * np.sin(2 * np.pi * frequency * np.arange(n) / sr)
    elif kind == "click_train":
        if bpm is None or bpm <= 0:
            raise ValueError("click_train needs a positive bpm")
        period = sr * 60.0 / bpm
        pos = np.round(np.arange(0.0, n, period)).astype(np.int64)
        y = np.zeros(n)
        y[pos[pos < n]] = 1.0
    elif kind == "white_noise":
        y = np.random.default_rng(seed).uniform(-amplitude, amplitude, n)
    else:
        raise ValueError(f"unknown signal kind {kind!r}")
    return AudioClip(y, sr, f"{kind}")


# --------------------------------------------------------------------------- #
# Manifests


@dataclass(frozen=True)
class ManifestEntry:
    path: Path
    label: int
    split_hint: str | None = None

    @property
    def clip_id(self) -> str:
        return self.path.stem


@dataclass
class Manifest:
    entries: list[ManifestEntry]
    label_names: list[str] = field(default_factory=lambda: list(QUADRANT_NAMES))

    @property
    def class_count(self) -> int:
        return len(self.label_names)

    @property
    def labels(self) -> np.ndarray:
        return np.array([e.label for e in self.entries], dtype=np.int64)

    def __len__(self) -> int:
        return len(self.entries)

    def validate(self) -> None:
        seen = set()
        for i, e in enumerate(self.entries):
            if not 0 <= e.label < self.class_count:
                raise DataError(f"entry {i} ({e.path}): label {e.label} outside [0, {self.class_count})")
            key = str(e.path)
            if key in seen:
                raise DataError(f"duplicate manifest path {e.path}")
            seen.add(key)


def read_label_names(path: str | os.PathLike) -> list[str]:
    names = [line.strip() for line in Path(path).read_text().splitlines()]
    names = [n for n in names if n]
    if not names:
        raise DataError(f"{path}: no label names")
    return names


def load_manifest(path: str | os.PathLike, label_names_path: str | os.PathLike | None = None) -> Manifest:
    """Parse a ``path,label`` CSV (optional third column ``split``).

    Labels are integer indices or names. Names come from ``label_names_path``,
    else a ``labels.txt`` next to the manifest, else the quadrant names
    Q1..Q4. Relative audio paths resolve against the manifest's directory.
    """
    path = Path(path)
    if not path.exists():
        raise DataError(f"{path}: manifest not found")
    if label_names_path is None and (path.parent / "labels.txt").exists():
        label_names_path = path.parent / "labels.txt"
    names = read_label_names(label_names_path) if label_names_path else list(QUADRANT_NAMES)
    index = {n: i for i, n in enumerate(names)}

    text = path.read_text()
    if not text.strip():
        raise DataError(f"{path}: empty manifest")
    reader = csv.reader(io.StringIO(text))
    header = [h.strip() for h in next(reader)]
    if header[:2] != ["path", "label"]:
        raise DataError(f"{path}: header must start with 'path,label', got {','.join(header)!r}")
    has_split = len(header) > 2 and header[2] == "split"

    entries: list[ManifestEntry] = []
    seen: dict[str, int] = {}
    for lineno, row in enumerate(reader, start=2):
        if not row or all(not c.strip() for c in row):
            continue
        if len(row) < 2:
            raise DataError(f"{path}:{lineno}: malformed row {row!r}")
        raw_path, raw_label = row[0].strip(), row[1].strip()
        if not raw_path:
            raise DataError(f"{path}:{lineno}: empty path")
        if raw_label.lstrip("-").isdigit():
            label = int(raw_label)
            if not 0 <= label < len(names):
                raise DataError(f"{path}:{lineno}: label index {label} outside [0, {len(names)})")
        elif raw_label in index:
            label = index[raw_label]
        else:
            raise DataError(f"{path}:{lineno}: unknown label name {raw_label!r}")
        audio = Path(raw_path)
        if not audio.is_absolute():
            audio = path.parent / audio
        key = os.path.normpath(audio)
        if key in seen:
            raise DataError(f"{path}:{lineno}: duplicate path {raw_path} (first on line {seen[key]})")
        seen[key] = lineno
        split = row[2].strip() or None if has_split and len(row) > 2 else None
        entries.append(ManifestEntry(Path(key), label, split))

    if not entries:
        raise DataError(f"{path}: empty manifest")
    return Manifest(entries, names)


def write_manifest(manifest: Manifest, path: str | os.PathLike) -> None:
    """Write the manifest CSV plus a ``labels.txt`` sidecar in the same directory."""
    path = Path(path)
    has_split = any(e.split_hint for e in manifest.entries)
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["path", "label", "split"] if has_split else ["path", "label"])
    for e in manifest.entries:
        try:
            rel = os.path.relpath(e.path, path.parent)
        except ValueError:
            rel = str(e.path)
        row = [rel, e.label]
        if has_split:
            row.append(e.split_hint or "")
        writer.writerow(row)
    atomic_write_text(path, buf.getvalue())
    atomic_write_text(path.parent / "labels.txt", "\n".join(manifest.label_names) + "\n")
