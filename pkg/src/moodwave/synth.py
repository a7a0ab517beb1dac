"""Seeded four-class synthetic audio set used for end-to-end checks.

Classes: 0 low-tempo sine pad, 1 high-tempo click-rich, 2 noise-dominated,
3 chord arpeggio. Every clip draws its own pitches, tempo and levels, so no
two clips are identical.
"""

from __future__ import annotations

import os
from pathlib import Path

import numpy as np
from scipy import signal

from .audio_io import CANONICAL_SR, AudioClip, Manifest, ManifestEntry, write_manifest, write_wav
from .seeds import SYNTH, rng_for

CLASS_NAMES = ("sine_pad", "click_rich", "noise", "arpeggio")


def _midi_hz(m):
    return 440.0 * 2.0 ** ((np.asarray(m, dtype=float) - 69) / 12)


def _tone(f, t, n_harm=1, rolloff=0.5):
    out = np.zeros_like(t)
    for h in range(1, n_harm + 1):
        out += rolloff ** (h - 1) * np.sin(2 * np.pi * f * h * t)
    return out


def _sine_pad(rng, t, sr):
    root = rng.uniform(45, 57)  # roughly A2..A3
    freqs = _midi_hz([root, root + 7, root + 12])
    y = sum(rng.uniform(0.5, 1.0) * _tone(f, t) for f in freqs)
    bpm = rng.uniform(55, 80)
    swell = 0.75 + 0.25 * np.sin(2 * np.pi * bpm / 60 * t + rng.uniform(0, 2 * np.pi))
    return y * swell


def _click_rich(rng, t, sr):
    bpm = rng.uniform(150, 190)
    n = t.size
    y = np.zeros(n)
    burst_len = int(0.03 * sr)
    env = np.exp(-np.arange(burst_len) / (0.004 * sr))
    period = sr * 60 / bpm / 2  # eighth notes
    start = rng.uniform(0, period)
    for pos in np.arange(start, n, period).astype(int):
        seg = rng.standard_normal(burst_len) * env
        seg = np.diff(seg, prepend=0.0)  # bright clicks
        end = min(n, pos + burst_len)
        y[pos:end] += seg[: end - pos] * rng.uniform(0.6, 1.0)
    return y + 0.05 * _tone(_midi_hz(rng.uniform(84, 96)), t)


def _noise(rng, t, sr):
    y = rng.standard_normal(t.size)
    lo, hi = sorted(rng.uniform(300, 8000, size=2))
    hi = max(hi, lo * 1.5)
    sos = signal.butter(2, [lo, min(hi, 0.45 * sr)], btype="band", fs=sr, output="sos")
    y = signal.sosfilt(sos, y) + 0.3 * y
    wobble = 1.0 + 0.2 * np.sin(2 * np.pi * rng.uniform(0.2, 1.0) * t)
    return y * wobble


def _arpeggio(rng, t, sr):
    root = rng.uniform(57, 69)
    chord = root + np.array([0, 4, 7, 12]) if rng.random() < 0.5 else root + np.array([0, 3, 7, 12])
    bpm = rng.uniform(95, 125)
    step = 60 / bpm / 2
    n_step = int(round(step * sr))
    y = np.zeros(t.size)
    tt = np.arange(n_step) / sr
    env = np.exp(-tt / (0.35 * step))
    order = rng.permutation(4)
    for k, pos in enumerate(range(0, t.size, n_step)):
        f = _midi_hz(chord[order[k % 4]])
        note = _tone(f, tt, n_harm=4, rolloff=0.45) * env
        end = min(t.size, pos + n_step)
        y[pos:end] += note[: end - pos]
    return y


_GENERATORS = (_sine_pad, _click_rich, _noise, _arpeggio)


def synth_clip(label: int, index: int, seed: int = 0, seconds: float = 3.0, sr: int = CANONICAL_SR) -> AudioClip:
    rng = rng_for(seed, SYNTH, label, index)
    t = np.arange(int(round(seconds * sr))) / sr
    y = _GENERATORS[label](rng, t, sr)
    y = y / max(np.max(np.abs(y)), 1e-12)
    y = y + rng.standard_normal(y.size) * 10 ** (rng.uniform(-45, -35) / 20)
    y *= rng.uniform(0.3, 0.8) / max(np.max(np.abs(y)), 1e-12)
    return AudioClip(y, sr, f"{CLASS_NAMES[label]}_{index:03d}")


def synth_dataset(per_class: int = 100, seed: int = 0, seconds: float = 3.0, sr: int = CANONICAL_SR,
                  classes: int = 4) -> tuple[list[AudioClip], np.ndarray]:
    """Clips ordered class by class, with their labels."""
    if not 1 <= classes <= len(_GENERATORS):
        raise ValueError(f"classes must lie in [1, {len(_GENERATORS)}]")
    clips, labels = [], []
    for label in range(classes):
        for i in range(per_class):
            clips.append(synth_clip(label, i, seed, seconds, sr))
            labels.append(label)
    return clips, np.array(labels, dtype=np.int64)


def write_synth_dataset(out_dir: str | os.PathLike, per_class: int = 100, seed: int = 0, seconds: float = 3.0,
                        sr: int = CANONICAL_SR) -> Manifest:
    """Write WAVs plus ``manifest.csv`` and ``labels.txt`` under ``out_dir``."""
    out_dir = Path(out_dir)
    (out_dir / "audio").mkdir(parents=True, exist_ok=True)
    clips, labels = synth_dataset(per_class, seed, seconds, sr)
    entries = []
    for clip, label in zip(clips, labels):
        rel = Path("audio") / f"{clip.source_id}.wav"
        write_wav(out_dir / rel, clip)
        entries.append(ManifestEntry(out_dir / rel, int(label)))
    manifest = Manifest(entries, list(CLASS_NAMES))
    write_manifest(manifest, out_dir / "manifest.csv")
    return manifest
