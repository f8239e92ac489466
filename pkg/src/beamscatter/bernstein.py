"""Empirical Bernstein constants for the Littlewood-Paley projectors.

Four families are measured, each as ``lhs / (N^(+-s) rhs)``:

* ``high``:     ``||P_{>=N} f||_q``        against ``N^-s ||grad|^s P_{>=N} f||_q``
* ``low``:      ``||grad|^s P_{<=N} f||_q`` against ``N^s ||P_{<=N} f||_q``
* ``band_up``:  ``||grad|^s P_N f||_q``     against ``N^s ||P_N f||_q``
* ``band_down``: ``||grad|^-s P_N f||_q``   against ``N^-s ||P_N f||_q``

For each dyadic ``N`` the fitted constant is the largest ratio over the
random fields.  A family passes when the fitted constants stay within a
factor ``ratio_bound`` of each other across ``N``.  At every ``N`` the
fields are zero-mean Gaussian noise whose spectrum fills the annulus
``[N/2, 4N]``, so every projection above has content on both sides.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
import scipy.fft as sfft

from .grid import Grid, fractional_symbol, lp_multiplier

__all__ = ["FAMILIES", "BernsteinFit", "bernstein_range", "random_annulus_fields", "bernstein_suite"]

FAMILIES = ("high", "low", "band_up", "band_down")


@dataclass
class BernsteinFit:
    family: str
    s: float
    q: float
    N: list
    constants: list

    @property
    def spread(self) -> float:
        c = np.asarray(self.constants)
        return float(c.max() / c.min()) if c.size and c.min() > 0 else math.inf


def bernstein_range(grid: Grid) -> list[float]:
    """Dyadic ``N`` whose annulus ``[N/2, 4N]`` fits between the fundamental and the dealias cutoff."""
    lo = 2.0 * math.pi / min(grid.side)
    hi = (2.0 / 3.0) * min(grid.nyquist)
    out = []
    k = math.ceil(math.log2(2.0 * lo))
    while 2.0 ** k * 4.0 <= hi:
        out.append(2.0 ** k)
        k += 1
    return out


def random_annulus_fields(grid: Grid, N: float, count: int, rng: np.random.Generator) -> np.ndarray:
    """``count`` real fields with spectrum on ``N/2 <= |xi| <= 4N``, shape ``(count, *grid.shape)``."""
    mask = (grid.kabs >= 0.5 * N) & (grid.kabs <= 4.0 * N)
    if not mask.any():
        raise ValueError(f"no lattice modes in the annulus around N={N}")
    noise = rng.standard_normal((count,) + grid.shape)
    axes = tuple(range(1, grid.n + 1))
    hat = sfft.rfftn(noise, axes=axes, workers=grid.workers) * mask
    return sfft.irfftn(hat, s=grid.shape, axes=axes, workers=grid.workers)


def _norms(fields: np.ndarray, q: float, cell: float) -> np.ndarray:
    flat = np.abs(fields.reshape(fields.shape[0], -1))
    if math.isinf(q):
        return flat.max(axis=1)
    return (np.sum(flat ** q, axis=1) * cell) ** (1.0 / q)


def _chunk_ratios(grid: Grid, fields: np.ndarray, N: float, s_values, q_values) -> dict:
    """Largest ratio of each ``(family, s, q)`` over one batch of fields."""
    axes = tuple(range(1, grid.n + 1))
    cell = grid.cell_volume

    def back(hat):
        return sfft.irfftn(hat, s=grid.shape, axes=axes, workers=grid.workers)

    fh = sfft.rfftn(fields, axes=axes, workers=grid.workers)
    proj = {
        "high": fh * lp_multiplier(grid, N, "geq"),
        "low": fh * lp_multiplier(grid, N, "leq"),
        "band": fh * lp_multiplier(grid, N, "band"),
    }
    phys = {k: back(v) for k, v in proj.items()}
    out = {}
    for s in s_values:
        up = fractional_symbol(grid, s)
        derived = {
            "high": back(proj["high"] * up),
            "low": back(proj["low"] * up),
            "band_up": back(proj["band"] * up),
            "band_down": back(proj["band"] * fractional_symbol(grid, -s)),
        }
        for q in q_values:
            norm = {k: _norms(v, q, cell) for k, v in phys.items()}
            pairs = {
                "high": (norm["high"], N ** -s * _norms(derived["high"], q, cell)),
                "low": (_norms(derived["low"], q, cell), N ** s * norm["low"]),
                "band_up": (_norms(derived["band_up"], q, cell), N ** s * norm["band"]),
                "band_down": (_norms(derived["band_down"], q, cell), N ** -s * norm["band"]),
            }
            for fam, (lhs, rhs) in pairs.items():
                ok = rhs > 0
                out[(fam, s, q)] = float(np.max(lhs[ok] / rhs[ok])) if ok.any() else -math.inf
    return out


def bernstein_suite(
    grid: Grid,
    count: int = 100,
    s_values: Sequence[float] = (0.5, 1.0, 2.0),
    q_values: Sequence[float] = (2.0, math.inf),
    rng: Optional[np.random.Generator] = None,
    ratio_bound: float = 10.0,
    chunk: int = 25,
) -> dict:
    """Fit every family's constant per ``(s, q)`` over :func:`bernstein_range`."""
    rng = np.random.default_rng(0) if rng is None else rng
    Ns = bernstein_range(grid)
    if len(Ns) < 2:
        raise ValueError("grid too coarse: fewer than two dyadic scales fit")
    fits = {(f, s, q): [] for f in FAMILIES for s in s_values for q in q_values}
    for N in Ns:
        best = {key: -math.inf for key in fits}
        for start in range(0, count, chunk):
            fields = random_annulus_fields(grid, N, min(chunk, count - start), rng)
            for key, val in _chunk_ratios(grid, fields, N, s_values, q_values).items():
                best[key] = max(best[key], val)
        for key in fits:
            fits[key].append(best[key] if best[key] > -math.inf else math.nan)

    results = [BernsteinFit(f, s, q, list(Ns), c) for (f, s, q), c in fits.items()]
    rows = [
        {
            "family": r.family,
            "s": r.s,
            "q": "inf" if math.isinf(r.q) else r.q,
            "N": r.N,
            "constants": r.constants,
            "spread": r.spread,
            "ok": bool(r.spread <= ratio_bound),
        }
        for r in results
    ]
    return {
        "count": count,
        "N": list(Ns),
        "ratio_bound": ratio_bound,
        "fits": rows,
        "max_spread": max(r.spread for r in results),
        "passed": bool(all(r["ok"] for r in rows)),
    }
