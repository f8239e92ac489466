"""Binary checkpoint format.

Layout (all little-endian)::

    b"BEAM"                 magic
    uint32                  format version
    uint32                  n
    uint32[n]               points per axis
    float64[n]              side length per axis
    float64 x 4             m, lambda, p, t
    float64[prod(points)]   u, row-major
    float64[prod(points)]   v, row-major
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

from .grid import Grid
from .linear import EnergyState, Params

MAGIC = b"BEAM"
FORMAT_VERSION = 1

__all__ = ["MAGIC", "FORMAT_VERSION", "write_checkpoint", "read_checkpoint", "CheckpointError"]


class CheckpointError(ValueError):
    pass


def write_checkpoint(path, state: EnergyState, params: Params, t: float) -> None:
    g = state.grid
    n = g.n
    head = MAGIC + struct.pack(
        f"<II{n}I{n}d4d",
        FORMAT_VERSION,
        n,
        *g.points,
        *g.side,
        params.m,
        params.lam,
        params.p,
        float(t),
    )
    with open(path, "wb") as fh:
        fh.write(head)
        fh.write(np.ascontiguousarray(state.u, dtype="<f8").tobytes())
        fh.write(np.ascontiguousarray(state.v, dtype="<f8").tobytes())


def read_checkpoint(path) -> tuple[EnergyState, Params, float]:
    raw = Path(path).read_bytes()
    if raw[:4] != MAGIC:
        raise CheckpointError(f"{path}: bad magic {raw[:4]!r}")
    off = 4
    version, n = struct.unpack_from("<II", raw, off)
    off += 8
    if version != FORMAT_VERSION:
        raise CheckpointError(f"{path}: unsupported format version {version}")
    if not 1 <= n <= 4:
        raise CheckpointError(f"{path}: bad dimension {n}")
    points = struct.unpack_from(f"<{n}I", raw, off)
    off += 4 * n
    side = struct.unpack_from(f"<{n}d", raw, off)
    off += 8 * n
    m, lam, p, t = struct.unpack_from("<4d", raw, off)
    off += 32
    count = int(np.prod(points))
    if len(raw) != off + 16 * count:
        raise CheckpointError(f"{path}: truncated or oversized payload")
    data = np.frombuffer(raw, dtype="<f8", count=2 * count, offset=off).astype(float)
    grid = Grid(points, side)
    u = data[:count].reshape(points)
    v = data[count:].reshape(points)
    return EnergyState(grid, u, v), Params(m, lam, p), t
