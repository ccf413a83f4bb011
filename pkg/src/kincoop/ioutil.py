"""Shared output helpers: stable number formatting, atomic JSON writes."""

from __future__ import annotations

import json
import os
import tempfile
from pathlib import Path


def fmt(x: float) -> str:
    """Locale-independent decimal with '.' separator, stable across reruns."""
    return format(float(x), ".10g")


def write_atomic_json(path: Path, obj) -> None:
    """Write JSON via a temp file + rename so readers never see partial output."""
    path = Path(path)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name, suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as handle:
            json.dump(obj, handle, indent=2, sort_keys=True)
            handle.write("\n")
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
