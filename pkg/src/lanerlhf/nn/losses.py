"""Softmax, cross-entropy, and categorical entropy with gradients."""
from __future__ import annotations

import numpy as np


def log_softmax(logits: np.ndarray) -> np.ndarray:
    z = logits - logits.max(axis=-1, keepdims=True)
    return z - np.log(np.exp(z).sum(axis=-1, keepdims=True))


def softmax(logits: np.ndarray) -> np.ndarray:
    z = logits - logits.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def softmax_cross_entropy(
    logits: np.ndarray, targets: np.ndarray
) -> tuple[np.ndarray, np.ndarray]:
    """Per-row cross-entropy loss and its gradient.

    logits (B, C), targets (B,) integer classes.  Returns (losses (B,),
    dlogits (B, C)) where dlogits rows are softmax(logits) - onehot, i.e.
    the gradient of the per-row (unreduced) loss; callers scale for means.
    """
    targets = np.asarray(targets, dtype=np.intp)
    ls = log_softmax(logits)
    rows = np.arange(logits.shape[0])
    losses = -ls[rows, targets]
    dlogits = np.exp(ls)
    dlogits[rows, targets] -= 1.0
    return losses, dlogits


def categorical_entropy(logits: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Per-row entropy H = -sum p log p and dH/dlogits.

    dH/dz_j = -p_j * (log p_j + H).
    """
    ls = log_softmax(logits)
    p = np.exp(ls)
    h = -(p * ls).sum(axis=-1)
    dlogits = -p * (ls + h[..., None])
    return h, dlogits
