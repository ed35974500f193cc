"""Self-describing tensor checkpoints: JSON with shapes and a format version.

Float64 values round-trip exactly through JSON (shortest round-trip repr),
so saving and reloading is bitwise lossless and rerunning a deterministic
producer yields byte-identical files.
"""
from __future__ import annotations

import json
from pathlib import Path
from typing import Union

import numpy as np

from ..ioutil import atomic_write_text

FORMAT_VERSION = 1


class CheckpointError(ValueError):
    pass


def save_tensors(path: Union[str, Path], tensors: dict[str, np.ndarray], meta: dict) -> None:
    doc = {
        "format_version": FORMAT_VERSION,
        "meta": meta,
        "tensors": {
            name: {"shape": list(arr.shape), "data": np.asarray(arr, dtype=np.float64).reshape(-1).tolist()}
            for name, arr in tensors.items()
        },
    }
    atomic_write_text(path, json.dumps(doc, separators=(",", ":"), allow_nan=False) + "\n")


def load_tensors(path: Union[str, Path]) -> tuple[dict[str, np.ndarray], dict]:
    path = Path(path)
    try:
        doc = json.loads(path.read_text())
    except OSError as e:
        raise CheckpointError(f"cannot read checkpoint {path}: {e}") from None
    except json.JSONDecodeError as e:
        raise CheckpointError(f"checkpoint {path} is not valid JSON: {e}") from None
    version = doc.get("format_version")
    if version != FORMAT_VERSION:
        raise CheckpointError(
            f"checkpoint {path}: format_version {version!r}, expected {FORMAT_VERSION}"
        )
    tensors = {}
    for name, entry in doc.get("tensors", {}).items():
        shape = tuple(entry["shape"])
        data = np.asarray(entry["data"], dtype=np.float64)
        expected = int(np.prod(shape)) if shape else 1
        if data.size != expected:
            raise CheckpointError(
                f"checkpoint {path}: tensor {name!r} has {data.size} values, shape {shape} needs {expected}"
            )
        tensors[name] = data.reshape(shape)
    return tensors, doc.get("meta", {})
