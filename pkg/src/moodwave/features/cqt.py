"""Constant-Q and variable-Q transforms with octave-folded chroma.

Kernels are built once per parameter set in the frequency domain and
applied to zero-padded, centred frames on the STFT hop grid, so every
transform shares the frame count of the spectrogram.
"""

from __future__ import annotations

from functools import lru_cache

import numpy as np
from scipy import fft as sp_fft
from scipy import sparse

from ..audio_io import AudioClip
from .spectrum import frame_signal, normalize_columns_max

C1_HZ = 32.70319566257483
KERNEL_THRESHOLD = 0.0054


def cqt_frequencies(n_bins: int = 84, bins_per_octave: int = 12, fmin: float = C1_HZ) -> np.ndarray:
    return fmin * 2.0 ** (np.arange(n_bins) / bins_per_octave)


def vqt_gamma(bins_per_octave: int = 12) -> float:
    """Bandwidth offset in Hz: each bin's bandwidth is ``alpha * f_k + gamma``."""
    return 24.0 * (2.0 ** (1.0 / bins_per_octave) - 1.0)


@lru_cache(maxsize=8)
def _spectral_kernels(sr: int, fmin: float, n_bins: int, bins_per_octave: int, gamma: float):
    freqs = cqt_frequencies(n_bins, bins_per_octave, fmin)
    alpha = 2.0 ** (1.0 / bins_per_octave) - 1.0
    lengths = sr / (alpha * freqs + gamma)
    n_fft = int(2 ** np.ceil(np.log2(lengths.max())))
    rows = np.zeros((n_bins, n_fft // 2 + 1), dtype=np.complex128)
    for k, (f, length) in enumerate(zip(freqs, lengths)):
        n = int(np.ceil(length))
        t = np.arange(n) - (n - 1) / 2
        w = np.hanning(n + 2)[1:-1]
        atom = w / w.sum() * np.exp(2j * np.pi * f * t / sr)
        frame = np.zeros(n_fft, dtype=np.complex128)
        start = n_fft // 2 - n // 2
        frame[start:start + n] = atom
        spectrum = np.conj(np.fft.fft(frame))[: n_fft // 2 + 1] / n_fft
        spectrum[np.abs(spectrum) < KERNEL_THRESHOLD * np.abs(spectrum).max()] = 0.0
        rows[k] = spectrum
    return sparse.csr_matrix(rows.T), n_fft


def _constant_q(clip: AudioClip, hop: int, n_bins: int, bins_per_octave: int, fmin: float, gamma: float) -> np.ndarray:
    top = fmin * 2.0 ** ((n_bins - 1) / bins_per_octave)
    if top * 2.0 ** (1.0 / bins_per_octave) > clip.sample_rate / 2:
        raise ValueError(
            f"top CQT bin {top:.1f} Hz exceeds the Nyquist rate of {clip.sample_rate} Hz audio"
        )
    kernel, n_fft = _spectral_kernels(clip.sample_rate, float(fmin), n_bins, bins_per_octave, float(gamma))
    n_frames = 1 + clip.samples.size // hop
    frames = frame_signal(clip.samples, n_fft, hop)[:n_frames]
    out = np.empty((n_bins, n_frames))
    step = max(1, (1 << 22) // n_fft)
    for s in range(0, n_frames, step):
        spec = sp_fft.rfft(frames[s:s + step], axis=1)
        out[:, s:s + step] = np.abs(kernel.T @ spec.T)
    return out


def cqt(clip: AudioClip, hop: int = 512, n_bins: int = 84, bins_per_octave: int = 12, fmin: float = C1_HZ) -> np.ndarray:
    """Constant-Q magnitudes, n_bins x T. A unit sine yields about 0.5 in its bin."""
    return _constant_q(clip, hop, n_bins, bins_per_octave, fmin, 0.0)


def vqt(clip: AudioClip, hop: int = 512, n_bins: int = 84, bins_per_octave: int = 12, fmin: float = C1_HZ) -> np.ndarray:
    return _constant_q(clip, hop, n_bins, bins_per_octave, fmin, vqt_gamma(bins_per_octave))


def chroma_fold(cq_mag: np.ndarray, bins_per_octave: int = 12) -> np.ndarray:
    """Sum log-frequency bins over octaves into 12 pitch classes, then max-normalize columns.

    Bin 0 must sit on a C (the default ``fmin`` is C1).
    """
    n_bins, n_frames = cq_mag.shape
    if n_bins % bins_per_octave:
        raise ValueError(f"{n_bins} bins do not fold into octaves of {bins_per_octave}")
    folded = cq_mag.reshape(n_bins // bins_per_octave, bins_per_octave, n_frames).sum(axis=0)
    if bins_per_octave != 12:
        step = bins_per_octave // 12
        folded = folded.reshape(12, step, n_frames).sum(axis=1)
    return normalize_columns_max(folded)


def chroma_cqt(clip: AudioClip, hop: int = 512) -> np.ndarray:
    return chroma_fold(cqt(clip, hop))


def chroma_vqt(clip: AudioClip, hop: int = 512) -> np.ndarray:
    return chroma_fold(vqt(clip, hop))
