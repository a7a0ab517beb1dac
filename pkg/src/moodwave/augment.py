"""Audio-domain augmentation: noise, circular time shift, pitch shift, speed change."""

from __future__ import annotations

import math
import os
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .audio_io import (
    CANONICAL_SR,
    AudioClip,
    Manifest,
    ManifestEntry,
    fix_duration,
    load_clip,
    sinc_resample,
    write_wav,
)
from .errors import DataError
from .features.spectrum import istft, stft
from .seeds import AUGMENT, rng_for

KINDS = ("noise", "time_shift", "pitch_shift", "speed")
SILENT_NOISE_POWER = 1e-6  # -60 dBFS

VOCODER_N_FFT = 2048
VOCODER_HOP = 512


def add_noise(clip: AudioClip, snr_db: float, seed: int) -> AudioClip:
    """Add white Gaussian noise at exactly ``snr_db`` (before clamping to [-1, 1]).

    ``snr_db = inf`` returns the clip unchanged. A silent clip gets noise at
    -60 dBFS since no ratio is defined.
    """
    if math.isinf(snr_db) and snr_db > 0:
        return clip
    if not math.isfinite(snr_db):
        raise ValueError(f"snr_db must be finite or +inf, got {snr_db}")
    x = clip.samples
    noise = np.random.default_rng(seed).standard_normal(x.size)
    p_signal = float(np.mean(x * x))
    p_target = p_signal / 10.0 ** (snr_db / 10.0) if p_signal > 0 else SILENT_NOISE_POWER
    noise *= math.sqrt(p_target / float(np.mean(noise * noise)))
    return clip.with_samples(x + noise)


def time_shift(clip: AudioClip, shift_seconds: float) -> AudioClip:
    """Circular rotation; positive shifts delay the signal."""
    n = int(round(shift_seconds * clip.sample_rate))
    return clip.with_samples(np.roll(clip.samples, n))


def phase_vocoder(spec: np.ndarray, rate: float, hop: int = VOCODER_HOP) -> np.ndarray:
    """Time-scale a one-sided STFT by ``rate`` (>1 is faster) with plain phase accumulation."""
    n_bins, n_frames = spec.shape
    n_fft = 2 * (n_bins - 1)
    steps = np.arange(0.0, n_frames, rate)
    padded = np.concatenate([spec, np.zeros((n_bins, 2), dtype=spec.dtype)], axis=1)
    advance = 2.0 * np.pi * hop * np.arange(n_bins) / n_fft
    phase = np.angle(spec[:, 0])
    out = np.empty((n_bins, steps.size), dtype=np.complex128)
    for t, step in enumerate(steps):
        i = int(step)
        frac = step - i
        left, right = padded[:, i], padded[:, i + 1]
        mag = (1.0 - frac) * np.abs(left) + frac * np.abs(right)
        out[:, t] = mag * np.exp(1j * phase)
        dphi = np.angle(right) - np.angle(left) - advance
        dphi -= 2.0 * np.pi * np.round(dphi / (2.0 * np.pi))
        phase = phase + advance + dphi
    return out


def time_stretch(samples: np.ndarray, sample_rate: int, rate: float) -> np.ndarray:
    """Phase-vocoder stretch to ``round(len / rate)`` samples, pitch unchanged."""
    clip = AudioClip(np.clip(samples, -1.0, 1.0), sample_rate)
    spec = stft(clip, VOCODER_N_FFT, VOCODER_HOP).complex
    stretched = phase_vocoder(spec, rate, VOCODER_HOP)
    return istft(stretched, VOCODER_HOP, VOCODER_N_FFT, length=int(round(samples.size / rate)))


def pitch_shift(clip: AudioClip, semitones: float) -> AudioClip:
    """Shift pitch by ``semitones`` while keeping the exact sample count.

    The clip is stretched in time by the pitch ratio, then resampled back to
    its original length.
    """
    if not -12 <= semitones <= 12:
        raise ValueError(f"semitones must lie in [-12, 12], got {semitones}")
    ratio = 2.0 ** (semitones / 12.0)
    n = clip.samples.size
    stretched = time_stretch(clip.samples, clip.sample_rate, 1.0 / ratio)
    return clip.with_samples(sinc_resample(stretched, n / stretched.size, n_out=n))


def speed_change(clip: AudioClip, rate: float, seconds: float | None = None, fix: bool = True) -> AudioClip:
    """Play back ``rate`` times faster: duration scales by 1/rate and pitch by rate.

    With ``fix`` the result is padded or truncated back to ``seconds``
    (default: the input duration).
    """
    if not 0.5 < rate < 2.0:
        raise ValueError(f"rate must lie in (0.5, 2.0), got {rate}")
    y = clip.with_samples(sinc_resample(clip.samples, 1.0 / rate))
    if not fix:
        return y
    return fix_duration(y, clip.duration if seconds is None else seconds)


@dataclass(frozen=True)
class AugmentSpec:
    """One augmentation transform with a fixed value, a uniform range, or a choice set."""

    kind: str
    value: float | None = None
    low: float | None = None
    high: float | None = None
    choices: tuple[float, ...] | None = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown augmentation {self.kind!r}; expected one of {KINDS}")
        given = sum(x is not None for x in (self.value, self.choices)) + (self.low is not None or self.high is not None)
        if given != 1 or ((self.low is None) != (self.high is None)):
            raise ValueError(f"{self.kind}: give exactly one of value, (low, high) or choices")
        for v in self._extremes():
            self._check(v)

    def _extremes(self):
        if self.value is not None:
            return [self.value]
        if self.choices is not None:
            return list(self.choices)
        return [self.low, self.high]

    def _check(self, v: float) -> None:
        if self.kind == "noise" and not (math.isfinite(v) or v == math.inf):
            raise ValueError(f"noise snr_db must be finite, got {v}")
        if self.kind == "pitch_shift" and not -12 <= v <= 12:
            raise ValueError(f"pitch_shift semitones must lie in [-12, 12], got {v}")
        if self.kind == "speed" and not 0.5 < v < 2.0:
            raise ValueError(f"speed rate must lie in (0.5, 2.0), got {v}")

    def draw(self, rng: np.random.Generator) -> float:
        if self.value is not None:
            return float(self.value)
        if self.choices is not None:
            return float(self.choices[int(rng.integers(len(self.choices)))])
        return float(rng.uniform(self.low, self.high))


def default_specs() -> list[AugmentSpec]:
    return [
        AugmentSpec("noise", value=20.0),
        AugmentSpec("time_shift", low=-2.0, high=2.0),
        AugmentSpec("pitch_shift", choices=(-2.0, -1.0, 1.0, 2.0)),
    ]


def parse_specs(text: str) -> list[AugmentSpec]:
    """``kind:value``, ``kind:low..high`` or ``kind:a|b|c`` items joined by commas."""
    specs = []
    for item in filter(None, (t.strip() for t in text.split(","))):
        kind, sep, arg = item.partition(":")
        if not sep or not arg:
            raise ValueError(f"augmentation {item!r} must look like kind:value")
        try:
            if "|" in arg:
                specs.append(AugmentSpec(kind, choices=tuple(float(v) for v in arg.split("|"))))
            elif ".." in arg:
                lo, hi = arg.split("..")
                specs.append(AugmentSpec(kind, low=float(lo), high=float(hi)))
            else:
                specs.append(AugmentSpec(kind, value=float(arg)))
        except ValueError as exc:
            raise ValueError(f"augmentation {item!r}: {exc}") from None
    return specs


def suffix_for(kind: str, value: float) -> str:
    if kind == "noise":
        return f"noise{value:g}"
    if kind == "time_shift":
        return f"shift{value:+.2f}"
    if kind == "pitch_shift":
        return f"pitch{value:+g}"
    return f"speed{value:.3g}"


def apply_augment(clip: AudioClip, spec: AugmentSpec, rng: np.random.Generator) -> tuple[AudioClip, float]:
    value = spec.draw(rng)
    if spec.kind == "noise":
        out = add_noise(clip, value, int(rng.integers(2**63)))
    elif spec.kind == "time_shift":
        if abs(value) >= clip.duration:
            raise ValueError(f"shift {value} s is not shorter than the {clip.duration:.2f} s clip")
        out = time_shift(clip, value)
    elif spec.kind == "pitch_shift":
        out = pitch_shift(clip, value)
    else:
        out = speed_change(clip, value)
    return out, value


@dataclass
class AugmentedClip:
    clip: AudioClip
    label: int
    kind: str | None
    value: float | None
    source_index: int


def expand_clips(
    clips: Sequence[AudioClip],
    labels: Sequence[int],
    specs: Sequence[AugmentSpec] | None = None,
    seed: int = 0,
) -> list[AugmentedClip]:
    """Each original followed by one copy per spec: ``N * (1 + len(specs))`` outputs.

    Randomness for clip ``i`` and spec ``j`` comes from its own stream keyed
    by ``(seed, i, j)``, so the result does not depend on processing order.
    """
    specs = default_specs() if specs is None else list(specs)
    if not specs:
        raise ValueError("expand_clips needs at least one augmentation spec")
    if len(clips) != len(labels):
        raise ValueError("clips and labels differ in length")
    out: list[AugmentedClip] = []
    for i, (clip, label) in enumerate(zip(clips, labels)):
        out.append(AugmentedClip(clip, int(label), None, None, i))
        for j, spec in enumerate(specs):
            aug, value = apply_augment(clip, spec, rng_for(seed, AUGMENT, i, j))
            sid = f"{clip.source_id}__{suffix_for(spec.kind, value)}"
            out.append(AugmentedClip(AudioClip(aug.samples, aug.sample_rate, sid), int(label), spec.kind, value, i))
    return out


def expand_dataset(
    manifest: Manifest,
    specs: Sequence[AugmentSpec] | None = None,
    seed: int = 0,
    out_dir: str | os.PathLike | None = None,
    sample_rate: int = CANONICAL_SR,
    seconds: float | None = None,
) -> tuple[Manifest, list[AugmentedClip]]:
    """Augment every manifest entry; write new clips as WAV under ``out_dir`` when given.

    Original entries keep their paths. Load failures are collected and
    reported together, one line per clip.
    """
    specs = default_specs() if specs is None else list(specs)
    if not specs:
        raise ValueError("expand_dataset needs at least one augmentation spec")
    clips, failures = [], []
    for e in manifest.entries:
        try:
            clips.append(load_clip(e.path, sample_rate, seconds))
        except DataError as exc:
            failures.append(str(exc))
    if failures:
        raise DataError("cannot load clips for augmentation:\n  " + "\n  ".join(failures))

    expanded = expand_clips(clips, manifest.labels, specs, seed)
    out_path = Path(out_dir) if out_dir is not None else None
    entries = []
    for item in expanded:
        src = manifest.entries[item.source_index]
        if item.kind is None:
            entries.append(src)
            continue
        path = (out_path if out_path is not None else src.path.parent) / f"{item.clip.source_id}.wav"
        if out_path is not None:
            write_wav(path, item.clip)
        entries.append(ManifestEntry(path, item.label, src.split_hint))
    return Manifest(entries, list(manifest.label_names)), expanded
