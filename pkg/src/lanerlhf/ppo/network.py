"""Recurrent actor-critic network.

Trunk: linear_in(obs -> width, tanh) -> LSTM(width) -> linear_f1(tanh)
-> linear_f2(tanh).  Heads: actor(width -> n_actions) and critic(width -> 1),
both zero-initialized so the fresh policy is uniform and values start at 0.
The fine-tune freeze boundary sits between the LSTM and linear_f1.
"""
from __future__ import annotations

from typing import Optional

import numpy as np

from ..nn import (
    ParamSet,
    linear_backward,
    linear_forward,
    linear_init,
    lstm_init,
    lstm_step_backward,
    lstm_step_forward,
    log_softmax,
    softmax,
)

# Everything before this boundary is frozen during preference fine-tuning.
FROZEN_TRUNK_PREFIXES = ("linear_in.", "lstm.")


class PolicyNet:
    def __init__(self, obs_dim: int, width: int = 32, n_actions: int = 5, seed: int = 0):
        self.obs_dim = obs_dim
        self.width = width
        self.n_actions = n_actions
        rng = np.random.default_rng(seed)
        p = ParamSet()
        w, b = linear_init(rng, obs_dim, width)
        p.add("linear_in.W", w), p.add("linear_in.b", b)
        w, b = lstm_init(rng, width, width)
        p.add("lstm.W", w), p.add("lstm.b", b)
        w, b = linear_init(rng, width, width)
        p.add("linear_f1.W", w), p.add("linear_f1.b", b)
        w, b = linear_init(rng, width, width)
        p.add("linear_f2.W", w), p.add("linear_f2.b", b)
        p.add("actor.W", np.zeros((n_actions, width))), p.add("actor.b", np.zeros(n_actions))
        p.add("critic.W", np.zeros((1, width))), p.add("critic.b", np.zeros(1))
        self.params = p

    def initial_state(self, batch: int = 1) -> tuple[np.ndarray, np.ndarray]:
        return (
            np.zeros((batch, self.width), dtype=np.float64),
            np.zeros((batch, self.width), dtype=np.float64),
        )

    def forward(
        self, obs: np.ndarray, state: tuple[np.ndarray, np.ndarray]
    ) -> tuple[np.ndarray, np.ndarray, tuple[np.ndarray, np.ndarray], tuple]:
        """One decision step.  obs (B, obs_dim), state (h, c) each (B, width).

        Returns (logits (B, n_actions), values (B,), new_state, cache).
        """
        p = self.params
        h_prev, c_prev = state
        x1 = np.tanh(linear_forward(obs, p["linear_in.W"].value, p["linear_in.b"].value))
        h, c, lstm_cache = lstm_step_forward(
            x1, h_prev, c_prev, p["lstm.W"].value, p["lstm.b"].value
        )
        f1 = np.tanh(linear_forward(h, p["linear_f1.W"].value, p["linear_f1.b"].value))
        f2 = np.tanh(linear_forward(f1, p["linear_f2.W"].value, p["linear_f2.b"].value))
        logits = linear_forward(f2, p["actor.W"].value, p["actor.b"].value)
        values = linear_forward(f2, p["critic.W"].value, p["critic.b"].value)[:, 0]
        cache = (obs, x1, lstm_cache, h, f1, f2)
        return logits, values, (h, c), cache

    def backward(self, cache: tuple, dlogits: np.ndarray, dvalues: np.ndarray) -> None:
        """Accumulate parameter gradients; carried LSTM state is treated as
        a constant (stored-state truncation), so nothing flows past it."""
        p = self.params
        obs, x1, lstm_cache, h, f1, f2 = cache
        dx_a, dw, db = linear_backward(dlogits, f2, p["actor.W"].value)
        p["actor.W"].grad += dw
        p["actor.b"].grad += db
        dx_c, dw, db = linear_backward(dvalues[:, None], f2, p["critic.W"].value)
        p["critic.W"].grad += dw
        p["critic.b"].grad += db
        df2 = (dx_a + dx_c) * (1.0 - f2 * f2)
        df1, dw, db = linear_backward(df2, f1, p["linear_f2.W"].value)
        p["linear_f2.W"].grad += dw
        p["linear_f2.b"].grad += db
        df1 *= 1.0 - f1 * f1
        dh, dw, db = linear_backward(df1, h, p["linear_f1.W"].value)
        p["linear_f1.W"].grad += dw
        p["linear_f1.b"].grad += db
        dx1, _, _, dw, db = lstm_step_backward(
            dh, np.zeros_like(dh), lstm_cache, p["lstm.W"].value, self.width
        )
        p["lstm.W"].grad += dw
        p["lstm.b"].grad += db
        dx1 *= 1.0 - x1 * x1
        _, dw, db = linear_backward(dx1, obs, p["linear_in.W"].value)
        p["linear_in.W"].grad += dw
        p["linear_in.b"].grad += db

    def act(
        self,
        obs: np.ndarray,
        state: tuple[np.ndarray, np.ndarray],
        rng: Optional[np.random.Generator] = None,
        greedy: bool = False,
    ) -> tuple[int, float, float, tuple[np.ndarray, np.ndarray]]:
        """Single-observation helper: returns (action, log_prob, value, state)."""
        logits, values, new_state, _ = self.forward(obs[None, :], state)
        lp = log_softmax(logits)[0]
        if greedy:
            action = int(np.argmax(logits[0]))
        else:
            if rng is None:
                raise ValueError("stochastic act() needs an rng")
            action = int(sample_categorical(logits[0], rng))
        return action, float(lp[action]), float(values[0]), new_state

    def apply_finetune_freeze(self) -> list[str]:
        return self.params.freeze(FROZEN_TRUNK_PREFIXES)


def sample_categorical(logits: np.ndarray, rng: np.random.Generator) -> int:
    """Draw from softmax(logits) using a single uniform variate."""
    p = softmax(logits[None, :])[0]
    u = rng.random()
    return int(np.searchsorted(np.cumsum(p), u, side="right").clip(0, p.size - 1))
