"""Recurrent cores over batch-first sequences (B, T, D) with full BPTT.

Both cores are many-to-one: the backward pass receives a gradient only for
the final hidden state.
"""

from __future__ import annotations

import numpy as np

from .tensor import sigmoid


def rnn_forward(x: np.ndarray, w_xh: np.ndarray, w_hh: np.ndarray, b_h: np.ndarray):
    """h_t = tanh(W_xh x_t + W_hh h_{t-1} + b_h) with h_0 = 0.

    Returns the hidden states (B, T+1, H), index 0 being h_0.
    """
    b, t_len, _ = x.shape
    hidden = w_hh.shape[0]
    w_hhT = np.ascontiguousarray(w_hh.T)
    hs = np.zeros((t_len + 1, b, hidden))
    hs[1:] = (x @ w_xh.T + b_h).transpose(1, 0, 2)
    for t in range(t_len):
        h = hs[t + 1]
        h += hs[t] @ w_hhT
        np.tanh(h, out=h)
    return hs.transpose(1, 0, 2)


def rnn_backward(dh_last: np.ndarray, x: np.ndarray, hs: np.ndarray, w_xh: np.ndarray, w_hh: np.ndarray):
    b, t_len, d = x.shape
    hidden = w_hh.shape[0]
    hs_t = np.ascontiguousarray(hs.transpose(1, 0, 2))
    w_hh = np.ascontiguousarray(w_hh)
    dpre = np.empty((t_len, b, hidden))
    dh = dh_last
    for t in range(t_len - 1, -1, -1):
        h = hs_t[t + 1]
        da = dpre[t]
        np.multiply(dh, 1.0 - h * h, out=da)
        dh = da @ w_hh
    flat = dpre.reshape(-1, hidden)
    dw_xh = flat.T @ np.ascontiguousarray(x.transpose(1, 0, 2)).reshape(-1, d)
    dw_hh = flat.T @ hs_t[:-1].reshape(-1, hidden)
    db = flat.sum(axis=0)
    dx = (dpre @ w_xh).transpose(1, 0, 2)
    return dw_xh, dw_hh, db, dx


def lstm_forward(x: np.ndarray, w: np.ndarray, b: np.ndarray):
    """Standard LSTM; ``w`` is (4H, D+H) with gate blocks ordered forget, input, output, candidate.

    Returns batch-first views (hs, cs: (B, T+1, H); gates: (B, T, 4H); tanh_c: (B, T, H))
    of time-major buffers, so each step touches contiguous memory.
    """
    bsz, t_len, d = x.shape
    hidden = w.shape[0] // 4
    w_x, w_hT = w[:, :d], np.ascontiguousarray(w[:, d:].T)
    gates = np.ascontiguousarray((x @ w_x.T + b).transpose(1, 0, 2))  # pre-activations, filled in place
    cs = np.zeros((t_len + 1, bsz, hidden))
    hs = np.zeros((t_len + 1, bsz, hidden))
    tanh_c = np.empty((t_len, bsz, hidden))
    h3 = 3 * hidden
    for t in range(t_len):
        g = gates[t]
        g += hs[t] @ w_hT
        g[:, :h3] = sigmoid(g[:, :h3])
        np.tanh(g[:, h3:], out=g[:, h3:])
        f, i, o, z = g[:, :hidden], g[:, hidden:2 * hidden], g[:, 2 * hidden:h3], g[:, h3:]
        c = cs[t + 1]
        np.multiply(f, cs[t], out=c)
        c += i * z
        np.tanh(c, out=tanh_c[t])
        np.multiply(o, tanh_c[t], out=hs[t + 1])
    tr = (1, 0, 2)
    return hs.transpose(tr), cs.transpose(tr), gates.transpose(tr), tanh_c.transpose(tr)


def lstm_backward(dh_last, x, w, hs, cs, gates, tanh_c):
    bsz, t_len, d = x.shape
    hidden = w.shape[0] // 4
    w_x, w_h = w[:, :d], np.ascontiguousarray(w[:, d:])
    tr = (1, 0, 2)
    hs_t, cs_t = np.ascontiguousarray(hs.transpose(tr)), np.ascontiguousarray(cs.transpose(tr))
    gates_t, tanh_t = np.ascontiguousarray(gates.transpose(tr)), np.ascontiguousarray(tanh_c.transpose(tr))
    h3 = 3 * hidden
    dpre = np.empty((t_len, bsz, 4 * hidden))
    dh = dh_last
    dc = np.zeros((bsz, hidden))
    for t in range(t_len - 1, -1, -1):
        g = gates_t[t]
        f, i, o, z = g[:, :hidden], g[:, hidden:2 * hidden], g[:, 2 * hidden:h3], g[:, h3:]
        tc = tanh_t[t]
        dc = dc + dh * o * (1.0 - tc * tc)
        da = dpre[t]
        da[:, :hidden] = dc * cs_t[t] * f * (1.0 - f)
        da[:, hidden:2 * hidden] = dc * z * i * (1.0 - i)
        da[:, 2 * hidden:h3] = dh * tc * o * (1.0 - o)
        da[:, h3:] = dc * i * (1.0 - z * z)
        dh = da @ w_h
        dc = dc * f
    flat = dpre.reshape(-1, 4 * hidden)
    dw = np.empty_like(w)
    dw[:, :d] = flat.T @ np.ascontiguousarray(x.transpose(tr)).reshape(-1, d)
    dw[:, d:] = flat.T @ hs_t[:-1].reshape(-1, hidden)
    db = flat.sum(axis=0)
    dx = (dpre @ w_x).transpose(tr)
    return dw, db, dx
