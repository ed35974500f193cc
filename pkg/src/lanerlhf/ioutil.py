"""Small I/O helpers: atomic writes and deterministic JSON."""
from __future__ import annotations

import json
import os
from pathlib import Path
from typing import Union


def dumps_json(obj) -> str:
    """Compact JSON with deterministic float formatting (repr round-trip)."""
    return json.dumps(obj, separators=(",", ":"), allow_nan=False)


def atomic_write_text(path: Union[str, Path], text: str) -> None:
    """Write via a temp file in the same directory, then rename."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_name(path.name + ".tmp")
    try:
        tmp.write_text(text)
        os.replace(tmp, path)
    finally:
        if tmp.exists():
            tmp.unlink(missing_ok=True)


def atomic_write_json(path: Union[str, Path], obj) -> None:
    atomic_write_text(path, dumps_json(obj) + "\n")
