"""Atomic file writes and full-precision CSV columns."""
from __future__ import annotations

import io
import os
import tempfile
from pathlib import Path

import numpy as np


def atomic_write_text(path, text: str) -> Path:
    """Write via a temporary file in the target directory, then rename."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="\n") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    return path


def format_csv(columns, arrays, fmt="%.17g") -> str:
    buf = io.StringIO()
    data = np.column_stack([np.asarray(a, dtype=float) for a in arrays]) if arrays else np.empty((0, 0))
    if isinstance(fmt, str):
        fmt = [fmt] * len(columns)
    np.savetxt(buf, data, fmt=fmt, delimiter=",", header=",".join(columns), comments="")
    return buf.getvalue()


def write_csv_columns(path, columns, arrays, fmt="%.17g") -> Path:
    return atomic_write_text(path, format_csv(columns, arrays, fmt))


def read_csv_columns(path, expected=None) -> dict:
    path = Path(path)
    with path.open() as fh:
        header = fh.readline().strip().split(",")
    if expected is not None and tuple(header) != tuple(expected):
        raise ValueError(f"{path}: expected columns {list(expected)}, found {header}")
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    if data.size == 0:
        data = np.empty((0, len(header)))
    return {name: data[:, i].copy() for i, name in enumerate(header)}
