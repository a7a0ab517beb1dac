"""Global tempo from the autocorrelation of a log-mel spectral-flux envelope."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..audio_io import AudioClip
from .spectrum import EPS, Spectrogram, melspectrogram

PRIOR_BPM = 120.0
PRIOR_SIGMA_OCT = 1.0
MIN_BPM = 30.0
MAX_BPM = 300.0


@dataclass(frozen=True)
class TempoEstimate:
    bpm: float
    degenerate: bool = False


def onset_strength(spec: Spectrogram) -> np.ndarray:
    """Half-wave rectified frame-to-frame log-mel flux, summed over mel bands.

    The log floor is relative to the loudest mel cell, so the envelope does
    not change when the clip is scaled.
    """
    mel = melspectrogram(spec)
    logmel = np.log(mel + EPS * max(mel.max(), np.finfo(np.float64).tiny))
    flux = np.maximum(0.0, np.diff(logmel, axis=1)).sum(axis=0)
    return np.concatenate([[0.0], flux])


def autocorrelate(x: np.ndarray) -> np.ndarray:
    n = x.size
    size = 1 << int(np.ceil(np.log2(2 * n - 1)))
    f = np.fft.rfft(x, size)
    return np.fft.irfft(f * np.conj(f), size)[:n]


def tempo_prior(bpm: np.ndarray) -> np.ndarray:
    return np.exp(-0.5 * (np.log2(bpm / PRIOR_BPM) / PRIOR_SIGMA_OCT) ** 2)


def _peak_near(acf: np.ndarray, center: float, radius: int) -> float | None:
    lo = max(1, int(np.floor(center)) - radius)
    hi = min(acf.size - 2, int(np.ceil(center)) + radius)
    if hi < lo:
        return None
    i = lo + int(np.argmax(acf[lo:hi + 1]))
    a, b, c = acf[i - 1], acf[i], acf[i + 1]
    denom = a - 2 * b + c
    shift = 0.5 * (a - c) / denom if denom < 0 else 0.0
    return i + float(np.clip(shift, -0.5, 0.5))


def estimate_tempo(clip: AudioClip, spec: Spectrogram) -> TempoEstimate:
    """Prior-weighted autocorrelation peak over 30-300 BPM.

    The integer-lag winner is refined to a fractional period by fitting the
    autocorrelation peaks at its multiples (parabolic interpolation, then a
    least-squares period through the origin); at the default frame rate a
    single lag step is several BPM wide.
    """
    env = onset_strength(spec)
    fps = spec.sample_rate / spec.hop
    if clip.duration < 2.0 or not np.any(env > 0):
        return TempoEstimate(PRIOR_BPM, degenerate=True)
    acf = autocorrelate(env - env.mean())
    if acf[0] <= 0:
        return TempoEstimate(PRIOR_BPM, degenerate=True)

    min_lag = max(1, int(np.floor(60.0 * fps / MAX_BPM)))
    max_lag = min(env.size - 2, int(np.ceil(60.0 * fps / MIN_BPM)))
    if max_lag <= min_lag:
        return TempoEstimate(PRIOR_BPM, degenerate=True)
    lags = np.arange(min_lag, max_lag + 1)
    score = acf[lags] * tempo_prior(60.0 * fps / lags)
    best = int(lags[np.argmax(score)])

    peak = _peak_near(acf, best, 0)
    period = best if peak is None else peak
    num = den = 0.0
    reach = env.size // 2
    for m in range(1, max(2, int(reach // period) + 1)):
        q = _peak_near(acf, m * period, 1 + m // 4)
        if q is None or q > reach:
            break
        num += m * q
        den += m * m
        period = num / den
    return TempoEstimate(float(60.0 * fps / period))
