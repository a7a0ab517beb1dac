"""Exact t-SNE (O(N^2) affinities, no tree acceleration)."""

from __future__ import annotations

import io
import csv

import numpy as np

from .seeds import TSNE, rng_for

ENTROPY_TOL = 1e-5
EXAGGERATION = 12.0
EXAGGERATION_ITERS = 250
MIN_GAIN = 0.01
P_FLOOR = 1e-12


def sq_distances(x: np.ndarray) -> np.ndarray:
    sq = np.sum(x * x, axis=1)
    d = sq[:, None] - 2.0 * x @ x.T + sq[None, :]
    np.maximum(d, 0.0, out=d)
    np.fill_diagonal(d, 0.0)
    return d


def _row_entropy(d: np.ndarray, beta: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Conditional rows P_{j|i} for precisions ``beta`` and their Shannon entropies (nats).

    ``d`` holds squared distances with the diagonal already excluded (set to inf).
    """
    logits = -d * beta[:, None]
    logits -= np.max(logits, axis=1, keepdims=True)
    w = np.exp(logits)
    p = w / w.sum(axis=1, keepdims=True)
    with np.errstate(divide="ignore", invalid="ignore"):
        h = -np.sum(np.where(p > 0, p * np.log(p), 0.0), axis=1)
    return p, h


def conditional_affinities(x: np.ndarray, perplexity: float = 30.0, max_steps: int = 200) -> tuple[np.ndarray, np.ndarray]:
    """Row-stochastic P_{j|i} with each row's entropy matched to log(perplexity).

    Bisection on the Gaussian precision of every point at once. Returns the
    matrix and the per-row entropies reached.
    """
    n = x.shape[0]
    if n < 2:
        raise ValueError("t-SNE needs at least 2 points")
    if not 1.0 <= perplexity <= n - 1:
        raise ValueError(f"perplexity {perplexity} must lie in [1, N-1] for N={n}")
    d = sq_distances(x)
    np.fill_diagonal(d, np.inf)
    target = np.log(perplexity)
    beta = np.ones(n)
    lo = np.zeros(n)
    hi = np.full(n, np.inf)
    p, h = _row_entropy(d, beta)
    for _ in range(max_steps):
        diff = h - target
        if np.all(np.abs(diff) < ENTROPY_TOL):
            break
        # entropy too high -> sharpen (raise beta)
        up = diff > 0
        lo = np.where(up, beta, lo)
        hi = np.where(up, hi, beta)
        beta = np.where(np.isinf(hi), beta * 2.0, (lo + hi) / 2.0)
        p, h = _row_entropy(d, beta)
    np.fill_diagonal(p, 0.0)
    return p, h


def joint_affinities(x: np.ndarray, perplexity: float = 30.0) -> np.ndarray:
    p, _ = conditional_affinities(x, perplexity)
    p = (p + p.T) / (2.0 * p.shape[0])
    return np.maximum(p, P_FLOOR)


def _q_and_kernel(y: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    num = 1.0 / (1.0 + sq_distances(y))
    np.fill_diagonal(num, 0.0)
    q = np.maximum(num / num.sum(), P_FLOOR)
    return q, num


def kl_divergence(p: np.ndarray, y: np.ndarray) -> float:
    q, _ = _q_and_kernel(y)
    mask = ~np.eye(p.shape[0], dtype=bool)
    return float(np.sum(p[mask] * np.log(p[mask] / q[mask])))


def tsne(x, perplexity: float = 30.0, iters: int = 1000, seed: int = 0, learning_rate: float = 200.0,
         return_kl: bool = False):
    """Embed the rows of ``x`` in 2-D.

    Early exaggeration x12 for the first 250 iterations, momentum 0.5 then
    0.8, learning rate 200 with per-coordinate adaptive gains. Duplicate
    rows get a seeded 1e-10 jitter. With ``return_kl`` the KL objective of
    every iteration is returned as well (exaggerated P during exaggeration).
    """
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 2:
        raise ValueError(f"expected an N x F matrix, got shape {x.shape}")
    if not np.all(np.isfinite(x)):
        raise ValueError("non-finite input to t-SNE")
    rng = rng_for(seed, TSNE)
    n = x.shape[0]
    if np.unique(x, axis=0).shape[0] < n:
        x = x + 1e-10 * rng.standard_normal(x.shape)
    p = joint_affinities(x, perplexity)

    y = 1e-4 * rng.standard_normal((n, 2))
    update = np.zeros_like(y)
    gains = np.ones_like(y)
    kl_trace = []
    for it in range(iters):
        exaggerate = it < EXAGGERATION_ITERS
        pe = p * EXAGGERATION if exaggerate else p
        momentum = 0.5 if exaggerate else 0.8
        q, num = _q_and_kernel(y)
        pq = (pe - q) * num
        grad = 4.0 * (np.sum(pq, axis=1)[:, None] * y - pq @ y)
        if return_kl:
            off = ~np.eye(n, dtype=bool)
            kl_trace.append(float(np.sum(pe[off] * np.log(pe[off] / q[off]))))
        same = (grad > 0) == (update > 0)
        gains = np.where(same, gains * 0.8, gains + 0.2)
        np.maximum(gains, MIN_GAIN, out=gains)
        update = momentum * update - learning_rate * gains * grad
        y = y + update
        y -= y.mean(axis=0)
    if return_kl:
        return y, np.array(kl_trace)
    return y


def loo_1nn_accuracy(y: np.ndarray, labels) -> float:
    """Leave-one-out 1-nearest-neighbour accuracy of an embedding."""
    d = sq_distances(np.asarray(y, dtype=np.float64))
    np.fill_diagonal(d, np.inf)
    labels = np.asarray(labels)
    return float(np.mean(labels[np.argmin(d, axis=1)] == labels))


def embedding_csv(y: np.ndarray, labels, ids=None) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["id", "label", "x", "y"])
    ids = range(len(y)) if ids is None else ids
    for i, lab, (a, b) in zip(ids, labels, y):
        w.writerow([i, int(lab), repr(float(a)), repr(float(b))])
    return buf.getvalue()
