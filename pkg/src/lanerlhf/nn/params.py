"""Named parameter collections with gradients and freeze flags."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass
class Param:
    value: np.ndarray
    grad: np.ndarray
    frozen: bool = False


class ParamSet:
    """Ordered name -> Param map.  All arrays are float64."""

    def __init__(self):
        self._params: dict[str, Param] = {}

    def add(self, name: str, value: np.ndarray, frozen: bool = False) -> Param:
        if name in self._params:
            raise ValueError(f"duplicate parameter {name!r}")
        value = np.asarray(value, dtype=np.float64)
        p = Param(value=value, grad=np.zeros_like(value), frozen=frozen)
        self._params[name] = p
        return p

    def __getitem__(self, name: str) -> Param:
        return self._params[name]

    def __contains__(self, name: str) -> bool:
        return name in self._params

    def names(self) -> list[str]:
        return list(self._params)

    def items(self):
        return self._params.items()

    def zero_grads(self) -> None:
        for p in self._params.values():
            p.grad.fill(0.0)

    def freeze(self, prefixes: tuple[str, ...]) -> list[str]:
        """Freeze every parameter whose name starts with one of the prefixes."""
        hit = []
        for name, p in self._params.items():
            if name.startswith(prefixes):
                p.frozen = True
                hit.append(name)
        if not hit:
            raise ValueError(f"no parameters match freeze prefixes {prefixes}")
        return hit

    def frozen_names(self) -> list[str]:
        return [n for n, p in self._params.items() if p.frozen]

    def n_elements(self) -> int:
        return sum(p.value.size for p in self._params.values())

    def values_dict(self) -> dict[str, np.ndarray]:
        """Copies of all values, for checkpointing."""
        return {n: p.value.copy() for n, p in self._params.items()}

    def load_values(self, values: dict[str, np.ndarray]) -> None:
        """Overwrite values in place; names and shapes must match exactly."""
        missing = set(self._params) - set(values)
        extra = set(values) - set(self._params)
        if missing or extra:
            raise ValueError(f"parameter name mismatch: missing={sorted(missing)} extra={sorted(extra)}")
        for n, v in values.items():
            v = np.asarray(v, dtype=np.float64)
            if v.shape != self._params[n].value.shape:
                raise ValueError(
                    f"shape mismatch for {n!r}: {v.shape} vs {self._params[n].value.shape}"
                )
            self._params[n].value[...] = v

    def global_grad_norm(self) -> float:
        sq = 0.0
        for p in self._params.values():
            if not p.frozen:
                sq += float(np.sum(p.grad * p.grad))
        return float(np.sqrt(sq))

    def clip_grad_norm(self, max_norm: float) -> float:
        """Scale unfrozen grads so the global norm is at most max_norm."""
        norm = self.global_grad_norm()
        if norm > max_norm and norm > 0.0:
            scale = max_norm / norm
            for p in self._params.values():
                if not p.frozen:
                    p.grad *= scale
        return norm
