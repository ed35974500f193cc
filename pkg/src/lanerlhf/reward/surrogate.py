"""Rolling-window surrogate reward from a trained preference model.

At policy fine-tuning time the classifier scores the most recent window of
decision observations (up to the segment length it was trained on) and the
per-step reward is the clipped preferred-minus-other logit margin.
"""
from __future__ import annotations

from collections import deque
from pathlib import Path
from typing import Union

import numpy as np

from .model import RewardNet, load_reward_net

SURROGATE_CLIP = 5.0


class SurrogateReward:
    """Feed one normalized observation per decision; get the clipped logit
    margin of the window ending at that decision."""

    def __init__(self, net: RewardNet, window_steps: int, clip: float = SURROGATE_CLIP):
        if window_steps < 1:
            raise ValueError("window_steps must be >= 1")
        if clip <= 0:
            raise ValueError("clip must be positive")
        self.net = net
        self.window_steps = window_steps
        self.clip = clip
        self._window: deque = deque(maxlen=window_steps)

    def reset(self) -> None:
        self._window.clear()

    def push(self, obs_norm: np.ndarray) -> float:
        obs_norm = np.asarray(obs_norm, dtype=np.float64)
        if obs_norm.shape != (self.net.obs_dim,):
            raise ValueError(
                f"observation shape {obs_norm.shape} does not match model obs_dim {self.net.obs_dim}"
            )
        self._window.append(obs_norm)
        x = np.stack(self._window)[None, :, :]
        logits = self.net.logits(x)[0]
        margin = float(logits[1] - logits[0])
        return float(np.clip(margin, -self.clip, self.clip))

    @classmethod
    def from_checkpoint(cls, path: Union[str, Path], clip: float = SURROGATE_CLIP) -> "SurrogateReward":
        net, meta = load_reward_net(path)
        return cls(net, window_steps=int(meta["window_steps"]), clip=clip)
