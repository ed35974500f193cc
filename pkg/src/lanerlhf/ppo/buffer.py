"""Fixed-size rollout buffer and advantage computation."""
from __future__ import annotations

from typing import Optional

import numpy as np


class RolloutBuffer:
    """Stores one decision step per slot, including the LSTM state snapshot
    taken before the step so minibatches can replay the forward pass."""

    def __init__(self, n_steps: int, obs_dim: int, width: int):
        self.n_steps = n_steps
        self.obs = np.zeros((n_steps, obs_dim))
        self.h = np.zeros((n_steps, width))
        self.c = np.zeros((n_steps, width))
        self.actions = np.zeros(n_steps, dtype=np.intp)
        self.log_probs = np.zeros(n_steps)
        self.values = np.zeros(n_steps)
        self.rewards = np.zeros(n_steps)
        self.terminals = np.zeros(n_steps, dtype=bool)
        self.pos = 0

    @property
    def full(self) -> bool:
        return self.pos >= self.n_steps

    def add(self, obs, h, c, action, log_prob, value, reward, terminal) -> None:
        i = self.pos
        self.obs[i] = obs
        self.h[i] = h
        self.c[i] = c
        self.actions[i] = action
        self.log_probs[i] = log_prob
        self.values[i] = value
        self.rewards[i] = reward
        self.terminals[i] = terminal
        self.pos += 1

    def reset(self) -> None:
        self.pos = 0


def compute_advantages(
    rewards: np.ndarray,
    values: np.ndarray,
    terminals: np.ndarray,
    gamma: float,
    bootstrap_value: float,
    gae_lambda: Optional[float] = None,
) -> tuple[np.ndarray, np.ndarray]:
    """One-step TD advantages (default) or GAE(lambda) when gae_lambda is set.

        A_t = r_t + gamma * V(s_{t+1}) - V(s_t)

    V(s_{t+1}) is 0 past a terminal step and bootstrap_value after the last
    buffered step of an unfinished episode.  Returns (advantages, returns)
    with returns = advantages + values (the TD targets for the critic).
    """
    n = len(rewards)
    next_values = np.empty(n)
    next_values[:-1] = values[1:]
    next_values[-1] = bootstrap_value
    next_values[terminals] = 0.0
    deltas = rewards + gamma * next_values - values
    if gae_lambda is None:
        advantages = deltas
    else:
        advantages = np.empty(n)
        acc = 0.0
        for t in range(n - 1, -1, -1):
            if terminals[t]:
                acc = 0.0
            acc = deltas[t] + gamma * gae_lambda * acc
            advantages[t] = acc
    return advantages, advantages + values
