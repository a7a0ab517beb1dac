"""Feed-forward layers with explicit forward caches and backward passes."""

from __future__ import annotations

import numpy as np

BN_EPS = 1e-5
BN_MOMENTUM = 0.1


def linear_forward(x: np.ndarray, w: np.ndarray, b: np.ndarray) -> np.ndarray:
    return x @ w.T + b


def linear_backward(dout: np.ndarray, x: np.ndarray, w: np.ndarray):
    return dout @ w, dout.T @ x, dout.sum(axis=0)


def relu_forward(x: np.ndarray) -> np.ndarray:
    return np.maximum(x, 0.0)


def relu_backward(dout: np.ndarray, x: np.ndarray) -> np.ndarray:
    return dout * (x > 0)


def dropout_mask(shape, p: float, rng: np.random.Generator | None) -> np.ndarray | None:
    """Inverted-dropout mask (kept units scaled by 1/(1-p)); None means no dropout."""
    if p <= 0.0:
        return None
    if rng is None:
        raise ValueError("dropout in training mode needs a random generator")
    return (rng.random(shape) >= p) / (1.0 - p)


def batchnorm_forward(x, gamma, beta, running_mean, running_var, train: bool):
    """Batch normalisation over axis 0.

    In training mode the batch statistics are used and the running
    estimates are updated in place; otherwise the running estimates are a
    fixed affine map.
    """
    if train:
        if x.shape[0] < 2:
            raise ValueError("batch normalisation in training mode needs at least 2 samples")
        mean = x.mean(axis=0)
        var = x.var(axis=0)
        n = x.shape[0]
        running_mean *= 1.0 - BN_MOMENTUM
        running_mean += BN_MOMENTUM * mean
        running_var *= 1.0 - BN_MOMENTUM
        running_var += BN_MOMENTUM * var * n / (n - 1)
    else:
        mean, var = running_mean, running_var
    inv_std = 1.0 / np.sqrt(var + BN_EPS)
    xhat = (x - mean) * inv_std
    return gamma * xhat + beta, (xhat, inv_std, gamma, train)


def batchnorm_backward(dout, cache):
    xhat, inv_std, gamma, train = cache
    dgamma = (dout * xhat).sum(axis=0)
    dbeta = dout.sum(axis=0)
    dxhat = dout * gamma
    if not train:
        return dxhat * inv_std, dgamma, dbeta
    n = dout.shape[0]
    dx = inv_std / n * (n * dxhat - dxhat.sum(axis=0) - xhat * (dxhat * xhat).sum(axis=0))
    return dx, dgamma, dbeta
