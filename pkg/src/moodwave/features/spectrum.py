"""STFT and the spectrogram-derived frame features."""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view
from scipy import fft as sp_fft
from scipy.signal import get_window

from ..audio_io import AudioClip

EPS = 1e-10


@dataclass(frozen=True)
class Spectrogram:
    """One-sided complex STFT, bins x frames, on a centred frame grid."""

    complex: np.ndarray
    sample_rate: int
    n_fft: int
    hop: int
    window: str = "hann"

    @property
    def magnitudes(self) -> np.ndarray:
        return np.abs(self.complex)

    @property
    def power(self) -> np.ndarray:
        return self.complex.real ** 2 + self.complex.imag ** 2

    @property
    def frequencies(self) -> np.ndarray:
        return np.arange(self.n_fft // 2 + 1) * self.sample_rate / self.n_fft

    @property
    def n_frames(self) -> int:
        return self.complex.shape[1]


def frame_signal(x: np.ndarray, frame_length: int, hop: int, center: bool = True) -> np.ndarray:
    """Frames x samples view of ``x``; frame ``t`` is centred on sample ``t * hop``.

    Padding is a reflection of the signal, falling back to zeros when the
    signal is too short to reflect.
    """
    x = np.asarray(x, dtype=np.float64)
    if center:
        pad = frame_length // 2
        mode = "reflect" if x.size > pad else "constant"
        x = np.pad(x, pad, mode=mode)
    if x.size < frame_length:
        x = np.pad(x, (0, frame_length - x.size))
    return sliding_window_view(x, frame_length)[::hop]


@lru_cache(maxsize=16)
def _window(kind: str, n: int) -> np.ndarray:
    w = get_window(kind, n, fftbins=True)
    w.flags.writeable = False
    return w


def stft(clip: AudioClip, n_fft: int = 2048, hop: int = 512, window: str = "hann") -> Spectrogram:
    if n_fft <= 0 or n_fft & (n_fft - 1):
        raise ValueError(f"n_fft must be a power of two, got {n_fft}")
    if not 0 < hop <= n_fft:
        raise ValueError(f"hop must lie in (0, n_fft], got {hop}")
    if clip.samples.size < 1:
        raise ValueError("cannot transform an empty clip")
    frames = frame_signal(clip.samples, n_fft, hop) * _window(window, n_fft)
    spec = sp_fft.rfft(frames, axis=1).T
    return Spectrogram(np.ascontiguousarray(spec), clip.sample_rate, n_fft, hop, window)


def istft(spec: np.ndarray, hop: int, n_fft: int, length: int | None = None, window: str = "hann") -> np.ndarray:
    """Weighted overlap-add inverse of ``stft`` (centred frames)."""
    w = _window(window, n_fft)
    frames = sp_fft.irfft(spec.T, n=n_fft, axis=1) * w
    n_frames = frames.shape[0]
    total = n_fft + hop * (n_frames - 1)
    y = np.zeros(total)
    norm = np.zeros(total)
    for t in range(n_frames):
        y[t * hop:t * hop + n_fft] += frames[t]
        norm[t * hop:t * hop + n_fft] += w * w
    nz = norm > 1e-10
    y[nz] /= norm[nz]
    y = y[n_fft // 2:]
    if length is not None:
        y = y[:length] if y.size >= length else np.pad(y, (0, length - y.size))
    return y


# --------------------------------------------------------------------------- #
# Mel / MFCC


def hz_to_mel(f):
    return 2595.0 * np.log10(1.0 + np.asarray(f, dtype=np.float64) / 700.0)


def mel_to_hz(m):
    return 700.0 * (10.0 ** (np.asarray(m, dtype=np.float64) / 2595.0) - 1.0)


@lru_cache(maxsize=16)
def mel_filterbank(sr: int, n_fft: int, n_mels: int = 128, fmin: float = 0.0, fmax: float | None = None) -> np.ndarray:
    """Triangular HTK-mel filters, each scaled to unit area over frequency."""
    n_bins = n_fft // 2 + 1
    if n_mels > n_bins:
        raise ValueError(f"n_mels={n_mels} exceeds the {n_bins} available FFT bins")
    fmax = sr / 2 if fmax is None else fmax
    edges = mel_to_hz(np.linspace(hz_to_mel(fmin), hz_to_mel(fmax), n_mels + 2))
    freqs = np.arange(n_bins) * sr / n_fft
    lower = (freqs[None, :] - edges[:-2, None]) / np.diff(edges)[:-1, None]
    upper = (edges[2:, None] - freqs[None, :]) / np.diff(edges)[1:, None]
    fb = np.maximum(0.0, np.minimum(lower, upper))
    fb *= (2.0 / (edges[2:] - edges[:-2]))[:, None]
    fb.flags.writeable = False
    return fb


def melspectrogram(spec: Spectrogram, n_mels: int = 128, fmin: float = 0.0, fmax: float | None = None) -> np.ndarray:
    return mel_filterbank(spec.sample_rate, spec.n_fft, n_mels, fmin, fmax) @ spec.power


def mfcc(mel: np.ndarray, n_mfcc: int = 20) -> np.ndarray:
    return sp_fft.dct(np.log(mel + EPS), type=2, norm="ortho", axis=0)[:n_mfcc]


# --------------------------------------------------------------------------- #
# Chroma


def normalize_columns_max(m: np.ndarray) -> np.ndarray:
    peak = m.max(axis=0, keepdims=True)
    return np.divide(m, peak, out=np.zeros_like(m), where=peak > 0)


def pitch_class(freqs: np.ndarray) -> np.ndarray:
    """Nearest equal-tempered pitch class for each frequency (A440, C = 0)."""
    midi = 69.0 + 12.0 * np.log2(np.asarray(freqs, dtype=np.float64) / 440.0)
    return np.mod(np.round(midi).astype(np.int64), 12)


@lru_cache(maxsize=16)
def _chroma_map(sr: int, n_fft: int) -> np.ndarray:
    freqs = np.arange(1, n_fft // 2 + 1) * sr / n_fft
    cmap = np.zeros((12, n_fft // 2 + 1))
    cmap[pitch_class(freqs), np.arange(1, n_fft // 2 + 1)] = 1.0
    cmap.flags.writeable = False
    return cmap


def chroma_stft(spec: Spectrogram) -> np.ndarray:
    return normalize_columns_max(_chroma_map(spec.sample_rate, spec.n_fft) @ spec.power)


# --------------------------------------------------------------------------- #
# Scalar descriptors


def spectral_descriptors(spec: Spectrogram, clip: AudioClip) -> dict[str, np.ndarray]:
    """rms, centroid, bandwidth, flatness, rolloff and zero-crossing rate, each 1 x T.

    Silent frames get centroid, bandwidth and rolloff 0 and flatness 1. The
    flatness floor is relative to each frame's peak power, which keeps the
    measure invariant to the clip's gain.
    """
    mag = spec.magnitudes
    power = spec.power
    freqs = spec.frequencies[:, None]
    mag_sum = mag.sum(axis=0)
    silent = mag_sum <= np.finfo(np.float64).tiny
    safe = np.where(silent, 1.0, mag_sum)

    centroid = np.where(silent, 0.0, (freqs * mag).sum(axis=0) / safe)
    spread = (mag * (freqs - centroid) ** 2).sum(axis=0) / safe
    bandwidth = np.where(silent, 0.0, np.sqrt(spread))

    floor = EPS * power.max(axis=0, keepdims=True)
    p = np.where(silent, 1.0, power + floor)
    flatness = np.where(silent, 1.0, np.exp(np.mean(np.log(p), axis=0)) / np.mean(p, axis=0))

    cum = np.cumsum(power, axis=0)
    reached = cum >= 0.85 * cum[-1:, :]
    rolloff = np.where(silent, 0.0, spec.frequencies[np.argmax(reached, axis=0)])

    frames = frame_signal(clip.samples, spec.n_fft, spec.hop)[: spec.n_frames]
    rms = np.sqrt(np.mean(frames ** 2, axis=1))
    signs = np.signbit(frames)
    zcr = np.mean(signs[:, 1:] != signs[:, :-1], axis=1)

    return {
        "rms": rms[None, :],
        "spectral_centroid": centroid[None, :],
        "spectral_bandwidth": bandwidth[None, :],
        "spectral_flatness": flatness[None, :],
        "spectral_rolloff": rolloff[None, :],
        "zero_crossing_rate": zcr[None, :],
    }


def contrast_band_edges(sr: int, n_bands: int = 6, fmin: float = 200.0) -> np.ndarray:
    edges = np.concatenate([[0.0], fmin * 2.0 ** np.arange(n_bands + 1)])
    return np.minimum(edges, sr / 2)


def spectral_contrast(spec: Spectrogram, n_bands: int = 6, fmin: float = 200.0, quantile: float = 0.02) -> np.ndarray:
    """Peak-minus-valley log magnitude in octave bands; ``n_bands + 1`` rows.

    Row 0 is the sub-band below ``fmin``. Band peaks and valleys are the means
    of the top and bottom ``quantile`` of the band's bins (at least one bin).
    """
    mag = spec.magnitudes
    freqs = spec.frequencies
    edges = contrast_band_edges(spec.sample_rate, n_bands, fmin)
    out = np.zeros((n_bands + 1, mag.shape[1]))
    for k in range(n_bands + 1):
        lo, hi = edges[k], edges[k + 1]
        if k == n_bands:
            band = freqs >= lo
        else:
            band = (freqs >= lo) & (freqs < hi)
        sub = np.sort(mag[band], axis=0)
        if sub.shape[0] == 0:
            continue
        n = max(1, int(round(quantile * sub.shape[0])))
        valley = sub[:n].mean(axis=0)
        peak = sub[-n:].mean(axis=0)
        out[k] = np.log(peak + EPS) - np.log(valley + EPS)
    return out
