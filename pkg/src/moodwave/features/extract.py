"""Assembly of the 204-row per-frame feature matrix."""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from ..audio_io import AudioClip
from .cqt import chroma_fold, cqt, vqt
from .spectrum import chroma_stft, melspectrogram, mfcc, spectral_contrast, spectral_descriptors, stft
from .tempo import estimate_tempo
from .tonal import tonnetz

FEATURE_LAYOUT: tuple[tuple[str, int], ...] = (
    ("chroma_stft", 12),
    ("chroma_cqt", 12),
    ("chroma_vqt", 12),
    ("melspectrogram", 128),
    ("mfcc", 20),
    ("rms", 1),
    ("spectral_centroid", 1),
    ("spectral_bandwidth", 1),
    ("spectral_contrast", 7),
    ("spectral_flatness", 1),
    ("spectral_rolloff", 1),
    ("tonnetz", 6),
    ("zero_crossing_rate", 1),
    ("tempo", 1),
)
N_FEATURE_ROWS = sum(n for _, n in FEATURE_LAYOUT)


def _row_map() -> tuple[tuple[str, int, int], ...]:
    out, start = [], 0
    for name, count in FEATURE_LAYOUT:
        out.append((name, start, count))
        start += count
    return tuple(out)


ROW_MAP = _row_map()
ROW_SLICES = {name: slice(start, start + count) for name, start, count in ROW_MAP}


@dataclass(frozen=True)
class FrameConfig:
    n_fft: int = 2048
    hop: int = 512
    frames: int | None = 1293


@dataclass
class FeatureMatrix:
    data: np.ndarray
    frame_rate: float
    row_map: tuple[tuple[str, int, int], ...] = ROW_MAP
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.data.shape[0] != sum(c for _, _, c in self.row_map):
            raise ValueError(f"data has {self.data.shape[0]} rows, row map expects {N_FEATURE_ROWS}")

    @property
    def n_frames(self) -> int:
        return self.data.shape[1]

    def rows(self, name: str) -> np.ndarray:
        return self.data[ROW_SLICES[name]]


def fit_frames(m: np.ndarray, frames: int) -> np.ndarray:
    """Truncate, or pad by repeating the last column, to exactly ``frames`` columns."""
    n = m.shape[1]
    if n >= frames:
        return m[:, :frames]
    return np.concatenate([m, np.repeat(m[:, -1:], frames - n, axis=1)], axis=1)


def compute_families(clip: AudioClip, n_fft: int = 2048, hop: int = 512) -> tuple[dict[str, np.ndarray], dict]:
    """All fourteen feature families on one frame grid, keyed by name."""
    spec = stft(clip, n_fft, hop)
    mel = melspectrogram(spec)
    cq = cqt(clip, hop)
    chroma_c = chroma_fold(cq)
    tempo = estimate_tempo(clip, spec)
    fam = {
        "chroma_stft": chroma_stft(spec),
        "chroma_cqt": chroma_c,
        "chroma_vqt": chroma_fold(vqt(clip, hop)),
        "melspectrogram": mel,
        "mfcc": mfcc(mel),
        "spectral_contrast": spectral_contrast(spec),
        "tonnetz": tonnetz(chroma_c),
        "tempo": np.full((1, spec.n_frames), tempo.bpm),
    }
    fam.update(spectral_descriptors(spec, clip))
    return fam, {"tempo_bpm": tempo.bpm, "tempo_degenerate": tempo.degenerate}


def extract_all(clip: AudioClip, cfg: FrameConfig = FrameConfig()) -> FeatureMatrix:
    fam, meta = compute_families(clip, cfg.n_fft, cfg.hop)
    widths = {name: fam[name].shape[1] for name in fam}
    if len(set(widths.values())) != 1:
        raise RuntimeError(f"feature families disagree on frame count: {widths}")
    data = np.concatenate([fam[name] for name, _ in FEATURE_LAYOUT], axis=0)
    if cfg.frames is not None:
        data = fit_frames(data, cfg.frames)
    if not np.all(np.isfinite(data)):
        raise FloatingPointError(f"non-finite features for clip {clip.source_id!r}")
    return FeatureMatrix(data, clip.sample_rate / cfg.hop, meta=meta)


def thread_count() -> int:
    raw = os.environ.get("MOODWAVE_THREADS")
    if raw:
        try:
            return max(1, int(raw))
        except ValueError:
            pass
    return os.cpu_count() or 1


def extract_many(clips: Sequence[AudioClip], cfg: FrameConfig = FrameConfig(), threads: int | None = None) -> list[FeatureMatrix]:
    """Extract clips in parallel; result order follows the input order."""
    threads = thread_count() if threads is None else threads
    if threads <= 1 or len(clips) <= 1:
        return [extract_all(c, cfg) for c in clips]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(lambda c: extract_all(c, cfg), clips))
