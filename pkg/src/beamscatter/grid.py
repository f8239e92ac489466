"""Periodic box discretisation, spectral transforms and Littlewood-Paley projectors.

Transform convention
--------------------
Spectral coefficients are the *unnormalised* real-to-complex DFT of the
samples, ``f_hat = rfftn(f)``; the inverse carries the ``1/N_total`` factor.
Discrete Parseval then reads::

    sum(f**2) * dV == (dV / N_total) * sum(w * |f_hat|**2)

where ``w`` is 1 on the self-conjugate planes of the last (half-length) axis
and 2 elsewhere.  All spatial integrals use the midpoint rule on the sample
points, which is spectrally accurate for smooth periodic integrands.

Transforms are computed with :mod:`scipy.fft` using ``workers`` threads
(default 1).  Results are bit-reproducible for a fixed thread count.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from functools import cached_property
from typing import Callable, Sequence

import numpy as np
import scipy.fft as sfft

__all__ = [
    "Grid",
    "Field",
    "LPRangeWarning",
    "psi",
    "to_spectral",
    "to_physical",
    "apply_multiplier",
    "lp_multiplier",
    "lp_project",
    "dyadic_range",
    "fractional_derivative",
    "lp_norm",
    "sobolev_norm",
]


class LPRangeWarning(UserWarning):
    """A dyadic frequency lies outside what the lattice can resolve."""


def _is_power_of_two(k: int) -> bool:
    return k > 0 and (k & (k - 1)) == 0


@dataclass(frozen=True)
class Grid:
    """Uniform periodic grid on ``[0, L_1) x ... x [0, L_n)``.

    Parameters
    ----------
    points : sequence of int
        Samples per axis; each a power of two and at least 8.
    side : sequence of float
        Box length per axis.
    workers : int
        Thread count handed to the FFT backend.
    """

    points: tuple[int, ...]
    side: tuple[float, ...]
    workers: int = 1

    def __post_init__(self):
        points = tuple(int(k) for k in self.points)
        side = tuple(float(s) for s in self.side)
        object.__setattr__(self, "points", points)
        object.__setattr__(self, "side", side)
        if not 1 <= len(points) <= 4:
            raise ValueError(f"dimension must be 1..4, got {len(points)}")
        if len(side) != len(points):
            raise ValueError("points and side must have the same length")
        for k in points:
            if k < 8 or not _is_power_of_two(k):
                raise ValueError(f"points per axis must be a power of two >= 8, got {k}")
        for s in side:
            if not (s > 0 and math.isfinite(s)):
                raise ValueError(f"side lengths must be positive and finite, got {s}")
        if self.workers < 1:
            raise ValueError("workers must be >= 1")

    @classmethod
    def cube(cls, n: int, points: int, side: float, workers: int = 1) -> "Grid":
        return cls((points,) * n, (side,) * n, workers)

    @property
    def n(self) -> int:
        return len(self.points)

    @property
    def shape(self) -> tuple[int, ...]:
        return self.points

    @property
    def size(self) -> int:
        return int(np.prod(self.points))

    @cached_property
    def spectral_shape(self) -> tuple[int, ...]:
        return self.points[:-1] + (self.points[-1] // 2 + 1,)

    @cached_property
    def dx(self) -> tuple[float, ...]:
        return tuple(L / k for L, k in zip(self.side, self.points))

    @cached_property
    def cell_volume(self) -> float:
        return float(np.prod(self.dx))

    @cached_property
    def volume(self) -> float:
        return float(np.prod(self.side))

    @cached_property
    def nyquist(self) -> tuple[float, ...]:
        return tuple(math.pi / h for h in self.dx)

    @cached_property
    def covering_radius(self) -> float:
        """Smallest radius whose periodic ball covers the whole torus."""
        return 0.5 * math.sqrt(sum(L * L for L in self.side))

    @cached_property
    def wavenumbers(self) -> tuple[np.ndarray, ...]:
        """Per-axis lattice ``(2 pi / L) * {-k/2, ..., k/2 - 1}`` in FFT order."""
        return tuple(
            2.0 * np.pi * np.fft.fftfreq(k, d=L / k) for k, L in zip(self.points, self.side)
        )

    @cached_property
    def coords(self) -> tuple[np.ndarray, ...]:
        return tuple(np.arange(k) * h for k, h in zip(self.points, self.dx))

    @cached_property
    def mesh(self) -> tuple[np.ndarray, ...]:
        """Broadcastable coordinate arrays (one per axis)."""
        out = []
        for ax, x in enumerate(self.coords):
            shp = [1] * self.n
            shp[ax] = x.size
            out.append(x.reshape(shp))
        return tuple(out)

    @cached_property
    def k(self) -> tuple[np.ndarray, ...]:
        """Broadcastable wavenumber arrays in the half-spectrum layout."""
        out = []
        for ax in range(self.n):
            if ax == self.n - 1:
                kk = 2.0 * np.pi * np.fft.rfftfreq(self.points[ax], d=self.dx[ax])
            else:
                kk = self.wavenumbers[ax]
            shp = [1] * self.n
            shp[ax] = kk.size
            out.append(kk.reshape(shp))
        return tuple(out)

    @cached_property
    def k_deriv(self) -> tuple[np.ndarray, ...]:
        """Wavenumbers for odd operators (first derivatives): Nyquist mode zeroed."""
        out = []
        for ax, kk in enumerate(self.k):
            kk = kk.copy()
            half = self.points[ax] // 2
            if ax == self.n - 1:
                kk.reshape(-1)[-1] = 0.0
            else:
                kk.reshape(-1)[half] = 0.0
            out.append(kk)
        return tuple(out)

    @cached_property
    def k2(self) -> np.ndarray:
        """``|xi|**2`` on the half-spectrum."""
        out = np.zeros(self.spectral_shape)
        for kk in self.k:
            out = out + kk * kk
        return out

    @cached_property
    def kabs(self) -> np.ndarray:
        return np.sqrt(self.k2)

    @cached_property
    def dealias_mask(self) -> np.ndarray:
        """2/3-rule mask: keep ``|xi_j| < (2/3) * nyquist_j`` on every axis."""
        mask = np.ones(self.spectral_shape, dtype=bool)
        for ax, kk in enumerate(self.k):
            mask = mask & (np.abs(kk) < (2.0 / 3.0) * self.nyquist[ax])
        return mask

    @cached_property
    def parseval_weights(self) -> np.ndarray:
        w = np.full(self.spectral_shape, 2.0)
        w[..., 0] = 1.0
        if self.points[-1] % 2 == 0:
            w[..., -1] = 1.0
        return w

    # raw-array helpers used throughout the package

    def fft(self, a: np.ndarray) -> np.ndarray:
        return sfft.rfftn(a, workers=self.workers)

    def ifft(self, ah: np.ndarray) -> np.ndarray:
        return sfft.irfftn(ah, s=self.points, axes=tuple(range(self.n)), workers=self.workers)

    def integrate(self, a: np.ndarray) -> float:
        return float(np.sum(a) * self.cell_volume)

    def inner(self, a: np.ndarray, b: np.ndarray) -> float:
        return float(np.vdot(a, b).real * self.cell_volume)

    def gradient(self, a: np.ndarray, ah: np.ndarray | None = None) -> list[np.ndarray]:
        ah = self.fft(a) if ah is None else ah
        return [self.ifft(1j * kk * ah) for kk in self.k_deriv]

    def laplacian(self, a: np.ndarray, ah: np.ndarray | None = None) -> np.ndarray:
        ah = self.fft(a) if ah is None else ah
        return self.ifft(-self.k2 * ah)

    def hessian(self, a: np.ndarray, ah: np.ndarray | None = None) -> list[list[np.ndarray]]:
        """Symmetric table of second derivatives ``d_i d_j a``."""
        ah = self.fft(a) if ah is None else ah
        n = self.n
        H = [[None] * n for _ in range(n)]
        for i in range(n):
            for j in range(i, n):
                if i == j:
                    h = self.ifft(-(self.k[i] ** 2) * ah)
                else:
                    h = self.ifft(-self.k_deriv[i] * self.k_deriv[j] * ah)
                H[i][j] = H[j][i] = h
        return H

    def min_image(self, y: Sequence[float]) -> list[np.ndarray]:
        """Broadcastable minimal-image displacement ``z = x - y`` on the torus."""
        out = []
        for ax in range(self.n):
            L = self.side[ax]
            d = self.mesh[ax] - float(y[ax])
            out.append(d - L * np.round(d / L))
        return out

    def distance(self, y: Sequence[float]) -> np.ndarray:
        z = self.min_image(y)
        r2 = np.zeros(self.shape)
        for c in z:
            r2 = r2 + c * c
        return np.sqrt(r2)

    def shift(self, a: np.ndarray, y: Sequence[float]) -> np.ndarray:
        """Translate ``a`` by ``y``: returns ``a(x - y)``.

        Whole-cell shifts are exact rolls; fractional parts use the
        trigonometric interpolant.
        """
        cells = [float(y[ax]) / self.dx[ax] for ax in range(self.n)]
        if all(abs(c - round(c)) < 1e-12 for c in cells):
            return np.roll(a, [int(round(c)) for c in cells], axis=tuple(range(self.n)))
        ah = self.fft(a)
        phase = np.zeros(self.spectral_shape)
        for ax in range(self.n):
            phase = phase + self.k_deriv[ax] * float(y[ax])
        return self.ifft(ah * np.exp(-1j * phase))


@dataclass(frozen=True)
class Field:
    """Samples of a real field on a grid, in physical or spectral form."""

    grid: Grid
    data: np.ndarray
    spectral: bool = False

    def __post_init__(self):
        expect = self.grid.spectral_shape if self.spectral else self.grid.shape
        if self.data.shape != expect:
            raise ValueError(f"data shape {self.data.shape} does not match grid {expect}")

    @classmethod
    def from_function(cls, grid: Grid, fn: Callable[..., np.ndarray]) -> "Field":
        data = np.broadcast_to(fn(*grid.mesh), grid.shape).astype(float)
        return cls(grid, np.ascontiguousarray(data))

    def physical(self) -> "Field":
        return to_physical(self) if self.spectral else self

    def values(self) -> np.ndarray:
        return self.physical().data


def to_spectral(f: Field) -> Field:
    if f.spectral:
        raise ValueError("field is already spectral")
    return Field(f.grid, f.grid.fft(f.data), spectral=True)


def to_physical(f: Field) -> Field:
    if not f.spectral:
        raise ValueError("field is already physical")
    return Field(f.grid, f.grid.ifft(f.data), spectral=False)


def _spectral_data(f: Field) -> np.ndarray:
    return f.data if f.spectral else f.grid.fft(f.data)


def _check_finite(sigma: np.ndarray) -> None:
    if not np.all(np.isfinite(sigma)):
        raise ValueError("multiplier is not finite on the wavenumber lattice")


def apply_multiplier(f: Field, sigma: Callable[..., np.ndarray] | np.ndarray) -> Field:
    """Scale the spectral coefficients of ``f`` by ``sigma(xi)``.

    ``sigma`` is either an array on the half-spectrum or a callable taking the
    broadcastable wavenumber arrays ``(xi_1, ..., xi_n)``.  It must satisfy
    ``sigma(-xi) = conj(sigma(xi))`` for the result to stay real.  The output
    keeps the representation of the input.
    """
    g = f.grid
    s = sigma(*g.k) if callable(sigma) else sigma
    s = np.broadcast_to(np.asarray(s), g.spectral_shape)
    _check_finite(s)
    out = _spectral_data(f) * s
    return Field(g, out, spectral=True) if f.spectral else Field(g, g.ifft(out))


def psi(r: np.ndarray) -> np.ndarray:
    """Radial bump: 1 on ``r <= 1``, 0 on ``r >= 2``, quintic smoothstep between."""
    r = np.asarray(r, dtype=float)
    t = np.clip(r - 1.0, 0.0, 1.0)
    return 1.0 - t * t * t * (10.0 - 15.0 * t + 6.0 * t * t)


_KINDS = ("band", "leq", "gt", "lt", "geq")


def dyadic_range(grid: Grid) -> list[float]:
    """Dyadic ``N = 2**k`` covering ``[2 pi / L_max, nyquist]``.

    The lowest entry is the largest power of two not above the fundamental
    frequency, the highest the smallest power of two not below the largest
    Nyquist frequency, so the band multipliers telescope to one on every
    nonzero resolved mode.
    """
    lo = 2.0 * math.pi / max(grid.side)
    hi = max(grid.nyquist)
    k_lo = math.floor(math.log2(lo))
    k_hi = math.ceil(math.log2(hi))
    return [2.0 ** k for k in range(k_lo, k_hi + 1)]


def lp_multiplier(grid: Grid, N: float, kind: str = "band") -> np.ndarray:
    """Littlewood-Paley symbol on the half-spectrum.

    ``band`` is ``psi(xi/N) - psi(2 xi/N)``, ``leq`` is ``psi(xi/N)``, ``gt`` is
    ``1 - psi(xi/N)``; ``lt = leq - band`` and ``geq = gt + band``.
    """
    if kind not in _KINDS:
        raise ValueError(f"kind must be one of {_KINDS}")
    if not N > 0:
        raise ValueError("N must be positive")
    lo = 2.0 * math.pi / max(grid.side)
    hi = max(grid.nyquist)
    if N < lo / 2 or N > 2 * hi:
        warnings.warn(
            f"dyadic N={N} outside resolvable range [{lo:.4g}, {hi:.4g}]",
            LPRangeWarning,
            stacklevel=2,
        )
    r = grid.kabs / N
    leq = psi(r)
    band = leq - psi(2.0 * r)
    if kind == "band":
        return band
    if kind == "leq":
        return leq
    if kind == "gt":
        return 1.0 - leq
    if kind == "lt":
        return leq - band
    return 1.0 - leq + band


def lp_project(f: Field, N: float, kind: str = "band") -> Field:
    return apply_multiplier(f, lp_multiplier(f.grid, N, kind))


def fractional_symbol(grid: Grid, s: float) -> np.ndarray:
    if not -4.0 < s < 4.0:
        raise ValueError(f"s must lie in (-4, 4), got {s}")
    if s == 0:
        return np.ones(grid.spectral_shape)
    kabs = grid.kabs
    with np.errstate(divide="ignore"):
        sym = np.where(kabs > 0, kabs, 1.0) ** s
    sym[kabs == 0] = 0.0
    return sym


def fractional_derivative(f: Field, s: float) -> Field:
    """``|grad|^s f``; for ``s < 0`` the zero mode is dropped."""
    return apply_multiplier(f, fractional_symbol(f.grid, s))


def lp_norm(f: Field, q: float) -> float:
    if f.spectral:
        raise ValueError("lp_norm needs a physical field")
    if not q >= 1:
        raise ValueError(f"q must be >= 1, got {q}")
    a = np.abs(f.data)
    if math.isinf(q):
        return float(a.max())
    return float((np.sum(a ** q) * f.grid.cell_volume) ** (1.0 / q))


def sobolev_norm(f: Field, s: float) -> float:
    return lp_norm(fractional_derivative(f.physical(), s), 2.0)
