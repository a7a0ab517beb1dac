"""Tonal-centroid (tonnetz) projection of chroma."""

import numpy as np

# (radius, angle step per pitch class) for fifths, minor thirds, major thirds
_CIRCLES = ((1.0, 7 * np.pi / 6), (1.0, 3 * np.pi / 2), (0.5, 2 * np.pi / 3))


def tonnetz_basis() -> np.ndarray:
    k = np.arange(12)
    rows = []
    for r, step in _CIRCLES:
        rows.append(r * np.sin(step * k))
        rows.append(r * np.cos(step * k))
    return np.array(rows)


def tonnetz(chroma: np.ndarray) -> np.ndarray:
    """Project L1-normalized chroma columns onto the six tonal-centroid axes."""
    total = np.abs(chroma).sum(axis=0, keepdims=True)
    norm = np.divide(chroma, total, out=np.zeros_like(chroma, dtype=np.float64), where=total > 0)
    return tonnetz_basis() @ norm
