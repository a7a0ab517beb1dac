"""Many-to-one RNN, bidirectional RNN and LSTM classifiers.

Inputs follow the dataset layout: a batch is (B, D, T) (features x frames
per sample), a single sequence may be passed as (D, T). Parameters live in
an ordered ``params`` dict of float64 arrays; ``forward`` returns logits
plus an opaque cache that ``backward`` consumes.
"""

from __future__ import annotations

import math

import numpy as np

from ..seeds import DROPOUT, INIT, rng_for
from . import layers
from .losses import cross_entropy
from .recurrent import lstm_backward, lstm_forward, rnn_backward, rnn_forward
from .tensor import check_finite, softmax, uniform

ARCHS = ("rnn", "brnn", "lstm")
DEFAULT_LSTM_HEAD = (128, 64, 32)


def as_batch(x: np.ndarray) -> np.ndarray:
    """(B, D, T) or (D, T) input -> batch-first (B, T, D) float64."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim == 2:
        x = x[None]
    if x.ndim != 3:
        raise ValueError(f"expected (B, D, T) or (D, T) input, got shape {x.shape}")
    return np.ascontiguousarray(x.transpose(0, 2, 1))


class SequenceClassifier:
    arch = ""

    def __init__(self, input_size: int, hidden_size: int = 128, n_classes: int = 4, dropout: float = 0.2, seed: int = 0):
        self.input_size = input_size
        self.hidden_size = hidden_size
        self.n_classes = n_classes
        self.dropout = dropout
        self.seed = seed
        self.params: dict[str, np.ndarray] = {}
        self.buffers: dict[str, np.ndarray] = {}
        self._build(rng_for(seed, INIT))
        self.dropout_rng = rng_for(seed, DROPOUT)

    # subclasses fill these in
    def _build(self, rng: np.random.Generator) -> None:
        raise NotImplementedError

    def _encode(self, xb: np.ndarray):
        raise NotImplementedError

    def _encode_backward(self, dfeat: np.ndarray, enc_cache, grads: dict) -> np.ndarray:
        raise NotImplementedError

    def _head_forward(self, feat, train, rng):
        raise NotImplementedError

    def _head_backward(self, dlogits, head_cache, grads: dict) -> np.ndarray:
        raise NotImplementedError

    def hyperparameters(self) -> dict:
        return {
            "input_size": self.input_size,
            "hidden_size": self.hidden_size,
            "n_classes": self.n_classes,
            "dropout": self.dropout,
            "seed": self.seed,
        }

    # ------------------------------------------------------------------ #

    def _linear(self, name: str, fan_out: int, fan_in: int, rng: np.random.Generator) -> None:
        self.params[f"{name}.W"] = uniform(rng, (fan_out, fan_in), 1.0 / math.sqrt(fan_in))
        self.params[f"{name}.b"] = np.zeros(fan_out)

    def forward(self, x: np.ndarray, train: bool = False, rng: np.random.Generator | None = None):
        """Logits (B, C) and the cache for ``backward``.

        Dropout and batch statistics are active only when ``train`` is set;
        ``rng`` (default: the model's own dropout stream) draws the masks.
        """
        xb = as_batch(x)
        if xb.shape[2] != self.input_size:
            raise ValueError(f"model expects {self.input_size} feature rows, got {xb.shape[2]}")
        check_finite("input", xb)
        feat, enc_cache = self._encode(xb)
        check_finite("hidden state", feat, f"{self.arch}, final step of {xb.shape[1]}")
        if train and rng is None:
            rng = self.dropout_rng
        logits, head_cache = self._head_forward(feat, train, rng)
        check_finite("logits", logits, self.arch)
        return logits, (xb.shape, enc_cache, head_cache)

    def backward(self, cache, dlogits: np.ndarray):
        """Gradients for every parameter plus the input gradient, shaped like the input batch (B, D, T)."""
        if cache is None:
            raise ValueError("backward needs the cache returned by forward")
        _, enc_cache, head_cache = cache
        grads: dict[str, np.ndarray] = {}
        dfeat = self._head_backward(dlogits, head_cache, grads)
        dx = self._encode_backward(dfeat, enc_cache, grads)
        return {k: grads[k] for k in self.params}, dx.transpose(0, 2, 1)

    def loss_and_grads(self, x, labels, rng=None):
        logits, cache = self.forward(x, train=True, rng=rng)
        loss, dlogits = cross_entropy(logits, labels)
        grads, _ = self.backward(cache, dlogits)
        return loss, grads, logits

    def predict_logits(self, x: np.ndarray, batch_size: int = 256) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        if x.ndim == 2:
            x = x[None]
        return np.concatenate(
            [self.forward(x[s:s + batch_size])[0] for s in range(0, x.shape[0], batch_size)], axis=0
        )

    def predict_proba(self, x: np.ndarray) -> np.ndarray:
        return softmax(self.predict_logits(x))

    def predict(self, x: np.ndarray) -> np.ndarray:
        """Argmax class per sample; ties go to the lowest index."""
        return np.argmax(self.predict_logits(x), axis=1)

    def state_arrays(self) -> dict[str, np.ndarray]:
        return {**self.params, **{f"buffer:{k}": v for k, v in self.buffers.items()}}

    def copy_state(self) -> dict[str, np.ndarray]:
        return {k: v.copy() for k, v in self.state_arrays().items()}

    def load_state(self, state: dict[str, np.ndarray]) -> None:
        for k, v in state.items():
            if k.startswith("buffer:"):
                self.buffers[k[7:]][...] = v
            else:
                self.params[k][...] = v


class _SingleLinearHead:
    """ReLU -> dropout -> linear, shared by the RNN and BRNN classifiers."""

    def _head_forward(self, feat, train, rng):
        act = layers.relu_forward(feat)
        mask = layers.dropout_mask(act.shape, self.dropout, rng) if train else None
        dropped = act if mask is None else act * mask
        logits = layers.linear_forward(dropped, self.params["head.W"], self.params["head.b"])
        return logits, (feat, mask, dropped)

    def _head_backward(self, dlogits, head_cache, grads):
        feat, mask, dropped = head_cache
        ddrop, grads["head.W"], grads["head.b"] = layers.linear_backward(dlogits, dropped, self.params["head.W"])
        dact = ddrop if mask is None else ddrop * mask
        return layers.relu_backward(dact, feat)


class RNNClassifier(_SingleLinearHead, SequenceClassifier):
    arch = "rnn"

    def _build(self, rng):
        d, h = self.input_size, self.hidden_size
        bound = 1.0 / math.sqrt(h)
        self.params["rnn.W_xh"] = uniform(rng, (h, d), bound)
        self.params["rnn.W_hh"] = uniform(rng, (h, h), bound)
        self.params["rnn.b_h"] = np.zeros(h)
        self._linear("head", self.n_classes, h, rng)

    def _encode(self, xb):
        p = self.params
        hs = rnn_forward(xb, p["rnn.W_xh"], p["rnn.W_hh"], p["rnn.b_h"])
        return hs[:, -1], (xb, hs)

    def _encode_backward(self, dfeat, enc_cache, grads):
        xb, hs = enc_cache
        p = self.params
        grads["rnn.W_xh"], grads["rnn.W_hh"], grads["rnn.b_h"], dx = rnn_backward(
            dfeat, xb, hs, p["rnn.W_xh"], p["rnn.W_hh"]
        )
        return dx


class BRNNClassifier(_SingleLinearHead, SequenceClassifier):
    """Independent forward and backward tanh chains; the head sees both terminal states."""

    arch = "brnn"

    def _build(self, rng):
        d, h = self.input_size, self.hidden_size
        bound = 1.0 / math.sqrt(h)
        for direction in ("fwd", "bwd"):
            self.params[f"{direction}.W_xh"] = uniform(rng, (h, d), bound)
            self.params[f"{direction}.W_hh"] = uniform(rng, (h, h), bound)
            self.params[f"{direction}.b_h"] = np.zeros(h)
        self._linear("head", self.n_classes, 2 * h, rng)

    def _encode(self, xb):
        p = self.params
        xr = np.ascontiguousarray(xb[:, ::-1])
        hs_f = rnn_forward(xb, p["fwd.W_xh"], p["fwd.W_hh"], p["fwd.b_h"])
        hs_b = rnn_forward(xr, p["bwd.W_xh"], p["bwd.W_hh"], p["bwd.b_h"])
        return np.concatenate([hs_f[:, -1], hs_b[:, -1]], axis=1), (xb, xr, hs_f, hs_b)

    def _encode_backward(self, dfeat, enc_cache, grads):
        xb, xr, hs_f, hs_b = enc_cache
        p = self.params
        h = self.hidden_size
        grads["fwd.W_xh"], grads["fwd.W_hh"], grads["fwd.b_h"], dx_f = rnn_backward(
            dfeat[:, :h], xb, hs_f, p["fwd.W_xh"], p["fwd.W_hh"]
        )
        grads["bwd.W_xh"], grads["bwd.W_hh"], grads["bwd.b_h"], dx_b = rnn_backward(
            dfeat[:, h:], xr, hs_b, p["bwd.W_xh"], p["bwd.W_hh"]
        )
        return dx_f + dx_b[:, ::-1]


class LSTMClassifier(SequenceClassifier):
    """LSTM encoder with a four-layer head: three (linear, batch norm, ReLU, dropout) blocks and a final linear."""

    arch = "lstm"

    def __init__(self, input_size, hidden_size=128, n_classes=4, dropout=0.2, seed=0, head_widths=DEFAULT_LSTM_HEAD):
        self.head_widths = tuple(int(w) for w in head_widths)
        super().__init__(input_size, hidden_size, n_classes, dropout, seed)

    def hyperparameters(self):
        return {**super().hyperparameters(), "head_widths": ",".join(map(str, self.head_widths))}

    def _build(self, rng):
        d, h = self.input_size, self.hidden_size
        bound = 1.0 / math.sqrt(h)
        self.params["lstm.W"] = uniform(rng, (4 * h, d + h), bound)
        b = np.zeros(4 * h)
        b[:h] = 1.0
        self.params["lstm.b"] = b
        widths = (h, *self.head_widths)
        for k in range(len(self.head_widths)):
            self._linear(f"fc{k}", widths[k + 1], widths[k], rng)
            self.params[f"bn{k}.gamma"] = np.ones(widths[k + 1])
            self.params[f"bn{k}.beta"] = np.zeros(widths[k + 1])
            self.buffers[f"bn{k}.running_mean"] = np.zeros(widths[k + 1])
            self.buffers[f"bn{k}.running_var"] = np.ones(widths[k + 1])
        self._linear("out", self.n_classes, widths[-1], rng)

    def _encode(self, xb):
        hs, cs, gates, tanh_c = lstm_forward(xb, self.params["lstm.W"], self.params["lstm.b"])
        return hs[:, -1], (xb, hs, cs, gates, tanh_c)

    def _encode_backward(self, dfeat, enc_cache, grads):
        xb, hs, cs, gates, tanh_c = enc_cache
        grads["lstm.W"], grads["lstm.b"], dx = lstm_backward(dfeat, xb, self.params["lstm.W"], hs, cs, gates, tanh_c)
        return dx

    def _head_forward(self, feat, train, rng):
        p = self.params
        z = feat
        caches = []
        for k in range(len(self.head_widths)):
            a = layers.linear_forward(z, p[f"fc{k}.W"], p[f"fc{k}.b"])
            bn, bn_cache = layers.batchnorm_forward(
                a, p[f"bn{k}.gamma"], p[f"bn{k}.beta"],
                self.buffers[f"bn{k}.running_mean"], self.buffers[f"bn{k}.running_var"], train,
            )
            act = layers.relu_forward(bn)
            mask = layers.dropout_mask(act.shape, self.dropout, rng) if train else None
            caches.append((z, bn_cache, bn, mask))
            z = act if mask is None else act * mask
        logits = layers.linear_forward(z, p["out.W"], p["out.b"])
        return logits, (caches, z)

    def _head_backward(self, dlogits, head_cache, grads):
        p = self.params
        caches, z = head_cache
        dz, grads["out.W"], grads["out.b"] = layers.linear_backward(dlogits, z, p["out.W"])
        for k in range(len(self.head_widths) - 1, -1, -1):
            z_in, bn_cache, bn, mask = caches[k]
            dact = dz if mask is None else dz * mask
            dbn = layers.relu_backward(dact, bn)
            da, grads[f"bn{k}.gamma"], grads[f"bn{k}.beta"] = layers.batchnorm_backward(dbn, bn_cache)
            dz, grads[f"fc{k}.W"], grads[f"fc{k}.b"] = layers.linear_backward(da, z_in, p[f"fc{k}.W"])
        return dz


def build_model(arch: str, input_size: int, hidden_size: int = 128, n_classes: int = 4, dropout: float = 0.2, seed: int = 0, **kw) -> SequenceClassifier:
    classes = {"rnn": RNNClassifier, "brnn": BRNNClassifier, "lstm": LSTMClassifier}
    if arch not in classes:
        raise ValueError(f"unknown architecture {arch!r}; expected one of {ARCHS}")
    return classes[arch](input_size, hidden_size, n_classes, dropout, seed, **kw)
