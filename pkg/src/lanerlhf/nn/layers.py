"""Linear and LSTM layers with hand-written backward passes.

Everything is float64.  Batched inputs are row-major: x has shape (B, n_in),
sequences (B, T, n_in).  Backward functions return input gradients and
accumulate into nothing; the caller adds returned dW/db into Param grads.
"""
from __future__ import annotations

import numpy as np


def glorot_uniform(rng: np.random.Generator, n_in: int, n_out: int, shape) -> np.ndarray:
    limit = np.sqrt(6.0 / (n_in + n_out))
    return rng.uniform(-limit, limit, size=shape).astype(np.float64)


def linear_init(rng: np.random.Generator, n_in: int, n_out: int) -> tuple[np.ndarray, np.ndarray]:
    w = glorot_uniform(rng, n_in, n_out, (n_out, n_in))
    b = np.zeros(n_out, dtype=np.float64)
    return w, b


def linear_forward(x: np.ndarray, w: np.ndarray, b: np.ndarray) -> np.ndarray:
    return x @ w.T + b


def linear_backward(
    dy: np.ndarray, x: np.ndarray, w: np.ndarray
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Returns (dx, dw, db) for y = x @ w.T + b."""
    dx = dy @ w
    dw = dy.T @ x
    db = dy.sum(axis=0)
    return dx, dw, db


def sigmoid(z: np.ndarray) -> np.ndarray:
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def lstm_init(rng: np.random.Generator, n_in: int, hidden: int) -> tuple[np.ndarray, np.ndarray]:
    """Gate weights (4H, n_in + H) stacked [i; f; g; o], forget bias +1."""
    w = glorot_uniform(rng, n_in + hidden, 4 * hidden, (4 * hidden, n_in + hidden))
    b = np.zeros(4 * hidden, dtype=np.float64)
    b[hidden : 2 * hidden] = 1.0
    return w, b


def lstm_step_forward(
    x: np.ndarray,
    h_prev: np.ndarray,
    c_prev: np.ndarray,
    w: np.ndarray,
    b: np.ndarray,
) -> tuple[np.ndarray, np.ndarray, tuple]:
    """One LSTM step.

        z = W @ [x; h_prev] + b, split into (i, f, g, o)
        c = sigmoid(f) * c_prev + sigmoid(i) * tanh(g)
        h = sigmoid(o) * tanh(c)

    Returns (h, c, cache) with cache holding what backward needs.
    """
    hidden = h_prev.shape[1]
    xh = np.concatenate([x, h_prev], axis=1)
    z = xh @ w.T + b
    i = sigmoid(z[:, :hidden])
    f = sigmoid(z[:, hidden : 2 * hidden])
    g = np.tanh(z[:, 2 * hidden : 3 * hidden])
    o = sigmoid(z[:, 3 * hidden :])
    c = f * c_prev + i * g
    tc = np.tanh(c)
    h = o * tc
    cache = (xh, c_prev, i, f, g, o, tc)
    return h, c, cache


def lstm_step_backward(
    dh: np.ndarray,
    dc: np.ndarray,
    cache: tuple,
    w: np.ndarray,
    n_in: int,
) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """Backward for one step given dL/dh and dL/dc flowing in from above/later.

    Returns (dx, dh_prev, dc_prev, dw, db).
    """
    xh, c_prev, i, f, g, o, tc = cache
    do = dh * tc
    dc_total = dc + dh * o * (1.0 - tc * tc)
    di = dc_total * g
    df = dc_total * c_prev
    dg = dc_total * i
    dc_prev = dc_total * f
    dz = np.concatenate(
        [
            di * i * (1.0 - i),
            df * f * (1.0 - f),
            dg * (1.0 - g * g),
            do * o * (1.0 - o),
        ],
        axis=1,
    )
    dw = dz.T @ xh
    db = dz.sum(axis=0)
    dxh = dz @ w
    return dxh[:, :n_in], dxh[:, n_in:], dc_prev, dw, db


def lstm_forward(
    xs: np.ndarray,
    h0: np.ndarray,
    c0: np.ndarray,
    w: np.ndarray,
    b: np.ndarray,
) -> tuple[np.ndarray, np.ndarray, np.ndarray, list]:
    """Run a (B, T, n_in) sequence; returns (hs (B,T,H), hT, cT, caches)."""
    B, T, _ = xs.shape
    hidden = h0.shape[1]
    hs = np.empty((B, T, hidden), dtype=np.float64)
    caches = []
    h, c = h0, c0
    for t in range(T):
        h, c, cache = lstm_step_forward(xs[:, t, :], h, c, w, b)
        hs[:, t, :] = h
        caches.append(cache)
    return hs, h, c, caches


def lstm_backward(
    dhs: np.ndarray,
    caches: list,
    w: np.ndarray,
    n_in: int,
) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """Full BPTT through a sequence.

    dhs is dL/dh_t for every step (zeros where the loss does not read h_t).
    Returns (dxs, dw, db, dh0, dc0).
    """
    T = len(caches)
    B = dhs.shape[0]
    dw = np.zeros_like(w)
    db = np.zeros(w.shape[0], dtype=np.float64)
    dxs = np.empty((B, T, n_in), dtype=np.float64)
    dh = np.zeros((B, w.shape[0] // 4), dtype=np.float64)
    dc = np.zeros_like(dh)
    for t in range(T - 1, -1, -1):
        dx, dh, dc, dw_t, db_t = lstm_step_backward(dhs[:, t, :] + dh, dc, caches[t], w, n_in)
        dxs[:, t, :] = dx
        dw += dw_t
        db += db_t
    return dxs, dw, db, dh, dc
