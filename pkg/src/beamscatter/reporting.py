"""Bit-stable CSV and JSON writers.

Floats are written with ``repr`` (shortest round-trip decimal), keys are
sorted, and nothing time- or host-dependent enters the output, so equal
inputs produce byte-identical files.
"""

from __future__ import annotations

import json
import math
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

__all__ = ["FORMAT_VERSION", "jsonable", "format_value", "write_csv", "write_json", "read_csv", "rows_from_columns"]

FORMAT_VERSION = 1


def jsonable(x):
    """Plain JSON data: numpy scalars and arrays unwrapped, non-finite floats as strings."""
    if isinstance(x, Mapping):
        return {str(k): jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [jsonable(v) for v in x]
    if isinstance(x, np.ndarray):
        return jsonable(x.tolist())
    if isinstance(x, (bool, np.bool_)):
        return bool(x)
    if isinstance(x, (int, np.integer)):
        return int(x)
    if isinstance(x, (float, np.floating)):
        f = float(x)
        return f if math.isfinite(f) else repr(f)
    return x


def format_value(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return "1" if x else "0"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        return repr(float(x))
    if x is None:
        return ""
    return str(x)


def _header_lines(kind: str, header: Mapping) -> list[str]:
    lines = [f"# beamscatter {kind} format_version={FORMAT_VERSION}"]
    for key in sorted(header):
        lines.append(f"# {key}=" + json.dumps(jsonable(header[key]), sort_keys=True, separators=(",", ":")))
    return lines


def write_csv(path, rows: Sequence[Mapping], header: Mapping, kind: str = "table") -> Path:
    """One row per mapping; columns follow the first row's key order."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    columns: list[str] = []
    for r in rows:
        for k in r:
            if k not in columns:
                columns.append(k)
    lines = _header_lines(kind, header)
    lines.append(",".join(columns))
    for r in rows:
        lines.append(",".join(format_value(r.get(c)) for c in columns))
    path.write_text("\n".join(lines) + "\n")
    return path


def read_csv(path) -> tuple[list[str], np.ndarray]:
    """Column names and a float array, skipping the ``#`` header block."""
    lines = [ln for ln in Path(path).read_text().splitlines() if not ln.startswith("#")]
    if not lines:
        raise ValueError(f"{path}: no table")
    cols = lines[0].split(",")
    data = [[float(v) if v else math.nan for v in ln.split(",")] for ln in lines[1:]]
    return cols, np.array(data, dtype=float).reshape(len(data), len(cols))


def write_json(path, payload: Mapping, header: Mapping) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    doc = {"format_version": FORMAT_VERSION}
    doc.update(jsonable(header))
    doc.update(jsonable(payload))
    path.write_text(json.dumps(doc, sort_keys=True, indent=2) + "\n")
    return path


def rows_from_columns(columns: Mapping[str, Iterable]) -> list[dict]:
    keys = list(columns)
    series = [list(columns[k]) for k in keys]
    n = len(series[0]) if series else 0
    return [{k: s[i] for k, s in zip(keys, series)} for i in range(n)]
