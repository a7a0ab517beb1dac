"""Array helpers shared by the network code.

Tensors are plain float64 numpy arrays; this module only adds the
finiteness guard and initialisers the networks need.
"""

from __future__ import annotations

import numpy as np

from ..errors import NumericalError

DTYPE = np.float64


def check_finite(name: str, value: np.ndarray, context: str = "") -> np.ndarray:
    if not np.all(np.isfinite(value)):
        where = f" ({context})" if context else ""
        raise NumericalError(f"non-finite values in {name}{where}")
    return value


def uniform(rng: np.random.Generator, shape: tuple[int, ...], bound: float) -> np.ndarray:
    return rng.uniform(-bound, bound, size=shape).astype(DTYPE)


def sigmoid(x: np.ndarray) -> np.ndarray:
    # tanh form: overflow-free and several times faster than scipy's expit here
    return 0.5 + 0.5 * np.tanh(0.5 * x)


def softmax(logits: np.ndarray) -> np.ndarray:
    z = logits - logits.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)
