"""Adam with decoupled weight decay."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .params import ParamSet


@dataclass
class AdamState:
    lr: float
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    weight_decay: float = 0.0
    lr_overrides: dict | None = None  # name-prefix -> lr, e.g. {"critic.": 1e-2}
    step: int = 0
    m: dict = field(default_factory=dict)
    v: dict = field(default_factory=dict)

    def lr_for(self, name: str) -> float:
        if self.lr_overrides:
            for prefix, lr in self.lr_overrides.items():
                if name.startswith(prefix):
                    return lr
        return self.lr


def adam_step(params: ParamSet, st: AdamState) -> None:
    """One update over all unfrozen parameters from their current grads.

    Decay is decoupled: value *= (1 - lr * weight_decay) before the moment
    update.  Frozen parameters are untouched entirely (no decay, no moments).
    The step counter increments once per call.
    """
    st.step += 1
    b1, b2 = st.beta1, st.beta2
    bc1 = 1.0 - b1**st.step
    bc2 = 1.0 - b2**st.step
    for name, p in params.items():
        if p.frozen:
            continue
        lr = st.lr_for(name)
        if st.weight_decay:
            p.value *= 1.0 - lr * st.weight_decay
        g = p.grad
        m = st.m.get(name)
        if m is None:
            m = st.m[name] = np.zeros_like(p.value)
            st.v[name] = np.zeros_like(p.value)
        v = st.v[name]
        m *= b1
        m += (1.0 - b1) * g
        v *= b2
        v += (1.0 - b2) * g * g
        p.value -= lr * (m / bc1) / (np.sqrt(v / bc2) + st.eps)
