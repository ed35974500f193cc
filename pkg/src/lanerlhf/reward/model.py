"""Sequence preference classifier.

A small recurrent scorer maps a decision-step observation series to two
class logits (class 1 = "the preferred side of a pair").  The wrapping
estimator follows the usual fit/predict/score conventions: pairwise labels
are flattened upstream into per-segment rows, so here it is a plain binary
sequence classifier with an internal validation split and early stopping.
"""
from __future__ import annotations

import copy
from pathlib import Path
from typing import Optional, Union

import numpy as np

from ..nn import (
    AdamState,
    ParamSet,
    adam_step,
    linear_backward,
    linear_forward,
    linear_init,
    load_tensors,
    lstm_backward,
    lstm_forward,
    lstm_init,
    save_tensors,
    softmax,
    softmax_cross_entropy,
)

REWARD_KIND = "reward"


class RewardNet:
    """linear_in(obs -> width, tanh) -> LSTM(width) -> linear_out(h_T -> 2).

    The output head is zero-initialized so an untrained net scores every
    sequence 0.5/0.5.
    """

    def __init__(self, obs_dim: int, width: int = 8, n_classes: int = 2, seed: int = 0):
        self.obs_dim = obs_dim
        self.width = width
        self.n_classes = n_classes
        rng = np.random.default_rng(seed)
        p = ParamSet()
        w, b = linear_init(rng, obs_dim, width)
        p.add("linear_in.W", w), p.add("linear_in.b", b)
        w, b = lstm_init(rng, width, width)
        p.add("lstm.W", w), p.add("lstm.b", b)
        p.add("linear_out.W", np.zeros((n_classes, width)))
        p.add("linear_out.b", np.zeros(n_classes))
        self.params = p

    def forward(self, x: np.ndarray) -> tuple[np.ndarray, tuple]:
        """x (B, T, obs_dim) -> (logits (B, n_classes), cache)."""
        p = self.params
        B, T, _ = x.shape
        z_pre = linear_forward(
            x.reshape(B * T, self.obs_dim), p["linear_in.W"].value, p["linear_in.b"].value
        )
        z = np.tanh(z_pre).reshape(B, T, self.width)
        h0 = np.zeros((B, self.width), dtype=np.float64)
        c0 = np.zeros((B, self.width), dtype=np.float64)
        _, h_last, _, caches = lstm_forward(z, h0, c0, p["lstm.W"].value, p["lstm.b"].value)
        logits = linear_forward(h_last, p["linear_out.W"].value, p["linear_out.b"].value)
        return logits, (x, z, h_last, caches)

    def backward(self, cache: tuple, dlogits: np.ndarray) -> None:
        p = self.params
        x, z, h_last, caches = cache
        B, T, _ = x.shape
        dh_last, dw, db = linear_backward(dlogits, h_last, p["linear_out.W"].value)
        p["linear_out.W"].grad += dw
        p["linear_out.b"].grad += db
        dhs = np.zeros((B, T, self.width), dtype=np.float64)
        dhs[:, -1, :] = dh_last
        dz, dw, db, _, _ = lstm_backward(dhs, caches, p["lstm.W"].value, self.width)
        p["lstm.W"].grad += dw
        p["lstm.b"].grad += db
        dz_pre = (dz * (1.0 - z * z)).reshape(B * T, self.width)
        _, dw, db = linear_backward(dz_pre, x.reshape(B * T, self.obs_dim), p["linear_in.W"].value)
        p["linear_in.W"].grad += dw
        p["linear_in.b"].grad += db

    def logits(self, x: np.ndarray) -> np.ndarray:
        out, _ = self.forward(x)
        return out


class SequencePreferenceClassifier:
    """Binary classifier over observation sequences with early stopping.

    Parameters mirror the construction arguments; ``fit`` expects
    X (N, T, obs_dim) and y in {0, 1} and refuses single-class data.
    """

    def __init__(
        self,
        hidden: int = 8,
        lr: float = 1e-4,
        batch_size: int = 32,
        weight_decay: float = 1e-5,
        max_epochs: int = 200,
        patience: int = 10,
        val_fraction: float = 0.1,
        seed: int = 0,
    ):
        self.hidden = hidden
        self.lr = lr
        self.batch_size = batch_size
        self.weight_decay = weight_decay
        self.max_epochs = max_epochs
        self.patience = patience
        self.val_fraction = val_fraction
        self.seed = seed
        self.net_: Optional[RewardNet] = None
        self.history_: Optional[dict] = None
        self.best_epoch_: Optional[int] = None
        self.classes_ = np.array([0, 1], dtype=np.int64)

    # -- sklearn-style plumbing -------------------------------------------
    _PARAM_NAMES = (
        "hidden",
        "lr",
        "batch_size",
        "weight_decay",
        "max_epochs",
        "patience",
        "val_fraction",
        "seed",
    )

    def get_params(self, deep: bool = True) -> dict:
        return {name: getattr(self, name) for name in self._PARAM_NAMES}

    def set_params(self, **kwargs) -> "SequencePreferenceClassifier":
        for key, val in kwargs.items():
            if key not in self._PARAM_NAMES:
                raise ValueError(f"unknown parameter {key!r}")
            setattr(self, key, val)
        return self

    def _check_fitted(self) -> RewardNet:
        if self.net_ is None:
            raise RuntimeError("classifier is not fitted; call fit() first")
        return self.net_

    @staticmethod
    def _check_X(X: np.ndarray) -> np.ndarray:
        X = np.asarray(X, dtype=np.float64)
        if X.ndim != 3:
            raise ValueError(f"X must be (n_sequences, n_steps, obs_dim); got shape {X.shape}")
        if not np.all(np.isfinite(X)):
            raise ValueError("X contains non-finite values")
        return X

    # -- training ---------------------------------------------------------
    def fit(self, X: np.ndarray, y: np.ndarray) -> "SequencePreferenceClassifier":
        X = self._check_X(X)
        y = np.asarray(y, dtype=np.int64)
        if y.shape != (X.shape[0],):
            raise ValueError("y must be one class per sequence")
        if not np.all(np.isin(y, self.classes_)):
            raise ValueError("y must contain only classes 0 and 1")
        uniq = np.unique(y)
        if uniq.size < 2:
            raise ValueError("training data contains a single class; cannot fit a preference model")
        if not 0.0 < self.val_fraction < 1.0:
            raise ValueError("val_fraction must be in (0, 1)")

        n, t, d = X.shape
        self.n_features_in_ = d
        self.n_steps_in_ = t
        rng = np.random.default_rng(self.seed)
        net = RewardNet(d, width=self.hidden, seed=self.seed)
        opt = AdamState(lr=self.lr, weight_decay=self.weight_decay)

        perm = rng.permutation(n)
        n_val = max(1, int(round(n * self.val_fraction)))
        n_val = min(n_val, n - 1)
        val_idx, train_idx = perm[:n_val], perm[n_val:]
        X_val, y_val = X[val_idx], y[val_idx]
        X_tr, y_tr = X[train_idx], y[train_idx]

        history = {"train_loss": [], "val_loss": [], "val_accuracy": []}
        best_loss = np.inf
        best_values = None
        best_epoch = -1
        stale = 0
        for epoch in range(self.max_epochs):
            order = rng.permutation(len(X_tr))
            total, count = 0.0, 0
            for start in range(0, len(order), self.batch_size):
                idx = order[start : start + self.batch_size]
                logits, cache = net.forward(X_tr[idx])
                losses, dlogits = softmax_cross_entropy(logits, y_tr[idx])
                net.params.zero_grads()
                net.backward(cache, dlogits / len(idx))
                adam_step(net.params, opt)
                total += float(losses.sum())
                count += len(idx)
            val_losses, _ = softmax_cross_entropy(net.logits(X_val), y_val)
            val_loss = float(val_losses.mean())
            val_acc = float(np.mean(np.argmax(net.logits(X_val), axis=1) == y_val))
            history["train_loss"].append(total / count)
            history["val_loss"].append(val_loss)
            history["val_accuracy"].append(val_acc)
            if val_loss < best_loss - 1e-12:
                best_loss = val_loss
                best_values = copy.deepcopy(net.params.values_dict())
                best_epoch = epoch
                stale = 0
            else:
                stale += 1
                if stale >= self.patience:
                    break
        if best_values is not None:
            net.params.load_values(best_values)
        self.net_ = net
        self.history_ = history
        self.best_epoch_ = best_epoch
        return self

    # -- inference --------------------------------------------------------
    def decision_function(self, X: np.ndarray) -> np.ndarray:
        """Per-sequence preference score: logit(class 1) - logit(class 0)."""
        net = self._check_fitted()
        logits = net.logits(self._check_X(X))
        return logits[:, 1] - logits[:, 0]

    def predict_proba(self, X: np.ndarray) -> np.ndarray:
        net = self._check_fitted()
        return softmax(net.logits(self._check_X(X)))

    def predict(self, X: np.ndarray) -> np.ndarray:
        net = self._check_fitted()
        return np.argmax(net.logits(self._check_X(X)), axis=1)

    def score(self, X: np.ndarray, y: np.ndarray) -> float:
        y = np.asarray(y, dtype=np.int64)
        return float(np.mean(self.predict(X) == y))

    def pair_accuracy(self, X: np.ndarray, y: np.ndarray) -> float:
        """Fraction of consecutive-row pairs ordered correctly by the score.

        Rows (2k, 2k+1) must hold the two sides of one pair with labels
        summing to 1, the layout the training-set export produces.  Score
        ties count 1/2, so an untrained zero-head model sits at exactly 0.5.
        This is the natural metric for pairwise-collected labels: the row
        label of a "both changed lanes" comparison depends on the opposing
        segment, so per-row accuracy has a ceiling well below 1 even for a
        perfect scorer, while the pair ordering does not.
        """
        y = np.asarray(y, dtype=np.int64)
        z = self.decision_function(X)
        if len(z) == 0 or len(z) % 2:
            raise ValueError("X must hold an even, positive number of rows (two per pair)")
        zl, zr = z[0::2], z[1::2]
        yl, yr = y[0::2], y[1::2]
        if not np.all(yl + yr == 1):
            raise ValueError("labels must sum to 1 within each consecutive row pair")
        pref_left = yl == 1
        correct = np.where(zl == zr, 0.5, ((zl > zr) == pref_left).astype(np.float64))
        return float(correct.mean())

    def initialize(self, obs_dim: int, n_steps: int) -> "SequencePreferenceClassifier":
        """Build the untrained network without fitting.

        The zero output head means every sequence scores 0 and both classes
        get probability 1/2; useful as the before-training baseline.
        """
        self.net_ = RewardNet(obs_dim, width=self.hidden, seed=self.seed)
        self.n_features_in_ = obs_dim
        self.n_steps_in_ = int(n_steps)
        return self

    # -- persistence ------------------------------------------------------
    def save(self, path: Union[str, Path], extra_meta: Optional[dict] = None) -> None:
        net = self._check_fitted()
        meta = {
            "kind": REWARD_KIND,
            "obs_dim": net.obs_dim,
            "width": net.width,
            "n_classes": net.n_classes,
            "window_steps": int(self.n_steps_in_),
            "params": self.get_params(),
            "best_epoch": self.best_epoch_,
        }
        if extra_meta:
            meta.update(extra_meta)
        save_tensors(path, net.params.values_dict(), meta)

    @classmethod
    def load(cls, path: Union[str, Path]) -> "SequencePreferenceClassifier":
        net, meta = load_reward_net(path)
        clf = cls(**{k: v for k, v in meta.get("params", {}).items() if k in cls._PARAM_NAMES})
        clf.net_ = net
        clf.n_features_in_ = net.obs_dim
        clf.n_steps_in_ = int(meta["window_steps"])
        clf.best_epoch_ = meta.get("best_epoch")
        return clf


def load_reward_net(path: Union[str, Path]) -> tuple[RewardNet, dict]:
    tensors, meta = load_tensors(path)
    if meta.get("kind") != REWARD_KIND:
        raise ValueError(f"checkpoint at {path} is not a reward model (kind={meta.get('kind')!r})")
    net = RewardNet(
        int(meta["obs_dim"]), width=int(meta["width"]), n_classes=int(meta.get("n_classes", 2))
    )
    net.params.load_values(tensors)
    return net, meta
