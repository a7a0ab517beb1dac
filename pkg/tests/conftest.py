import numpy as np
import pytest

from moodwave.audio_io import AudioClip, synth_signal

SR = 22050


@pytest.fixture
def sine440():
    return synth_signal("sine", 3.0, SR, frequency=440.0)


@pytest.fixture
def silence():
    return synth_signal("silence", 3.0, SR)


def tone(freqs, seconds=3.0, sr=SR, amp=0.4):
    t = np.arange(int(round(seconds * sr))) / sr
    y = sum(amp * np.sin(2 * np.pi * f * t) for f in np.atleast_1d(freqs))
    return AudioClip(np.clip(y, -1, 1), sr, "tone")


def peak_hz(x, sr):
    """Dominant frequency by a zero-padded windowed DFT with parabolic refinement."""
    n = 1 << int(np.ceil(np.log2(len(x)) + 2))
    mag = np.abs(np.fft.rfft(x * np.hanning(len(x)), n))
    k = int(np.argmax(mag[1:-1])) + 1
    a, b, c = np.log(mag[k - 1:k + 2] + 1e-300)
    k = k + 0.5 * (a - c) / (a - 2 * b + c)
    return k * sr / n


def rel_error(a, b):
    a, b = np.asarray(a, float), np.asarray(b, float)
    return float(np.linalg.norm(a - b) / max(np.linalg.norm(a) + np.linalg.norm(b), 1e-8))
