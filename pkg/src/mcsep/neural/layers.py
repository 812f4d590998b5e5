"""LSTM / BLSTM and affine layers with explicit backward passes.

Weights are packed per direction as one (Din + H + 1) x 4H matrix holding the
input weights, the recurrent weights and the bias row, in that order. Gate
order along the 4H axis is input, forget, cell, output.
"""

from __future__ import annotations

import numpy as np
from scipy.special import expit


def init_lstm(rng: np.random.Generator, din: int, hidden: int) -> np.ndarray:
    bound = 1.0 / np.sqrt(din + hidden)
    W = rng.uniform(-bound, bound, size=(din + hidden + 1, 4 * hidden))
    W[-1] = 0.0
    return W


def init_linear(rng: np.random.Generator, din: int, dout: int) -> np.ndarray:
    bound = 1.0 / np.sqrt(din)
    W = rng.uniform(-bound, bound, size=(din + 1, dout))
    W[-1] = 0.0
    return W


def linear_forward(x, W):
    return x @ W[:-1] + W[-1]


def linear_backward(dy, x, W):
    """Returns (dx, dW) for y = x @ W[:-1] + W[-1]; leading axes are summed."""
    din = W.shape[0] - 1
    x2 = x.reshape(-1, din)
    dy2 = dy.reshape(-1, dy.shape[-1])
    dW = np.empty_like(W)
    dW[:-1] = x2.T @ dy2
    dW[-1] = dy2.sum(axis=0)
    return dy @ W[:-1].T, dW


def lstm_forward(x: np.ndarray, W: np.ndarray):
    """Unidirectional LSTM over axis 1 of x (B x T x Din), zero initial state."""
    B, T, din = x.shape
    H = W.shape[1] // 4
    Wh = W[din : din + H]
    x = np.ascontiguousarray(x)
    xp = x @ W[:din] + W[-1]
    hs = np.zeros((B, T + 1, H))
    cs = np.zeros((B, T + 1, H))
    tanh_c = np.empty((B, T, H))
    gates = np.empty((B, T, 4 * H))
    for t in range(T):
        z = xp[:, t] + hs[:, t] @ Wh
        a = expit(z)
        a[:, 2 * H : 3 * H] = np.tanh(z[:, 2 * H : 3 * H])
        gates[:, t] = a
        c = a[:, H : 2 * H] * cs[:, t] + a[:, :H] * a[:, 2 * H : 3 * H]
        cs[:, t + 1] = c
        tc = np.tanh(c)
        tanh_c[:, t] = tc
        hs[:, t + 1] = a[:, 3 * H :] * tc
    return hs[:, 1:], (x, W, hs, cs, tanh_c, gates)


def lstm_backward(dh: np.ndarray, cache):
    x, W, hs, cs, tanh_c, gates = cache
    B, T, din = x.shape
    H = W.shape[1] // 4
    Wh_T = W[din : din + H].T
    dz = np.empty((B, T, 4 * H))
    dh_next = np.zeros((B, H))
    dc_next = np.zeros((B, H))
    for t in range(T - 1, -1, -1):
        a = gates[:, t]
        i, f, g, o = a[:, :H], a[:, H : 2 * H], a[:, 2 * H : 3 * H], a[:, 3 * H :]
        tc = tanh_c[:, t]
        dht = dh[:, t] + dh_next
        dc = dc_next + dht * o * (1.0 - tc * tc)
        dzt = dz[:, t]
        dzt[:, :H] = dc * g * i * (1.0 - i)
        dzt[:, H : 2 * H] = dc * cs[:, t] * f * (1.0 - f)
        dzt[:, 2 * H : 3 * H] = dc * i * (1.0 - g * g)
        dzt[:, 3 * H :] = dht * tc * o * (1.0 - o)
        dc_next = dc * f
        dh_next = dzt @ Wh_T
    dz2 = dz.reshape(B * T, 4 * H)
    dW = np.empty_like(W)
    dW[:din] = x.reshape(B * T, din).T @ dz2
    dW[din : din + H] = hs[:, :-1].reshape(B * T, H).T @ dz2
    dW[-1] = dz2.sum(axis=0)
    dx = dz @ W[:din].T
    return dx, dW


def blstm_forward(x: np.ndarray, W_fwd: np.ndarray, W_bwd: np.ndarray):
    """Forward and time-reversed LSTMs, outputs concatenated per frame (B x T x 2H)."""
    if not np.all(np.isfinite(x)):
        raise ValueError("non-finite input to BLSTM layer")
    hf, cache_f = lstm_forward(x, W_fwd)
    hb, cache_b = lstm_forward(np.ascontiguousarray(x[:, ::-1]), W_bwd)
    return np.concatenate([hf, hb[:, ::-1]], axis=-1), (cache_f, cache_b)


def blstm_backward(dout: np.ndarray, cache):
    cache_f, cache_b = cache
    H = dout.shape[-1] // 2
    dx_f, dW_f = lstm_backward(np.ascontiguousarray(dout[..., :H]), cache_f)
    dx_b, dW_b = lstm_backward(np.ascontiguousarray(dout[:, ::-1, H:]), cache_b)
    return dx_f + dx_b[:, ::-1], dW_f, dW_b


def blstm_layer(x: np.ndarray, params: dict) -> np.ndarray:
    """T x Din -> T x 2H using ``params['fwd']`` and ``params['bwd']``."""
    out, _ = blstm_forward(np.asarray(x, dtype=np.float64)[None], params["fwd"], params["bwd"])
    return out[0]
