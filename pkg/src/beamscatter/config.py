"""Run configuration: INI parsing, validation, defaults and initial data.

Example::

    [grid]
    n = 2
    points = 128
    L = 128

    [physics]
    m = 1
    lambda = 1
    p = 3

    [time]
    dt = 0.01
    T = 10
    snapshot_stride = 10

    [initial]
    kind = gaussian
    amplitude = 1
    sigma = 4

Only ``grid.n``, ``grid.points``, ``grid.L``, ``time.dt`` and ``time.T`` are
required.  An optional ``[experiment]`` section carries free-form settings
for individual CLI subcommands and is kept verbatim.  ``points`` and ``L`` accept one value (cube) or one per axis.
"""

from __future__ import annotations

import configparser
import dataclasses
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .checkpoint import read_checkpoint
from .grid import Grid
from .linear import EnergyState, Params
from .solver import WraparoundError, check_budget

__all__ = [
    "ConfigError",
    "GridConfig",
    "TimeConfig",
    "InitialConfig",
    "DiagnosticsConfig",
    "OutputConfig",
    "RunConfig",
    "parse_config",
    "parse_config_text",
    "build_initial",
    "make_rng",
    "INITIAL_KINDS",
]

INITIAL_KINDS = ("gaussian", "boosted_gaussian", "single_mode", "checkpoint")


class ConfigError(ValueError):
    pass


def _floats(text: str) -> tuple[float, ...]:
    return tuple(float(t) for t in text.replace(",", " ").split())


def _ints(text: str) -> tuple[int, ...]:
    return tuple(int(t) for t in text.replace(",", " ").split())


def _bool(text: str) -> bool:
    t = text.strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


@dataclass(frozen=True)
class GridConfig:
    n: int
    points: tuple[int, ...]
    L: tuple[float, ...]
    workers: int = 1

    def build(self) -> Grid:
        return Grid(self.points, self.L, self.workers)


@dataclass(frozen=True)
class TimeConfig:
    dt: float
    T: float
    snapshot_stride: int = 1


@dataclass(frozen=True)
class InitialConfig:
    kind: str = "gaussian"
    amplitude: float = 1.0
    sigma: float = 4.0
    center: Optional[tuple[float, ...]] = None
    velocity: Optional[tuple[float, ...]] = None
    mode: Optional[tuple[int, ...]] = None
    noise: float = 0.0
    path: Optional[str] = None


@dataclass(frozen=True)
class DiagnosticsConfig:
    R: float = 8.0
    delta: float = 0.5
    v_cap: float = 1.0
    actions: bool = True
    ydot: str = "zero"
    radius_ladder: int = 32


@dataclass(frozen=True)
class OutputConfig:
    directory: str = "out"
    formats: tuple[str, ...] = ("csv", "json")


@dataclass(frozen=True)
class RunConfig:
    grid: GridConfig
    params: Params
    time: TimeConfig
    initial: InitialConfig = field(default_factory=InitialConfig)
    diagnostics: DiagnosticsConfig = field(default_factory=DiagnosticsConfig)
    output: OutputConfig = field(default_factory=OutputConfig)
    seed: int = 0
    allow_wraparound: bool = False
    experiment: dict = field(default_factory=dict)

    def build_grid(self) -> Grid:
        return self.grid.build()

    def resolved(self) -> dict:
        """Every field, defaults included, as plain nested data."""
        out = {
            "grid": dataclasses.asdict(self.grid),
            "physics": {"m": self.params.m, "lambda": self.params.lam, "p": self.params.p},
            "time": dataclasses.asdict(self.time),
            "initial": dataclasses.asdict(self.initial),
            "diagnostics": dataclasses.asdict(self.diagnostics),
            "output": dataclasses.asdict(self.output),
            "seed": self.seed,
            "allow_wraparound": self.allow_wraparound,
            "experiment": dict(sorted(self.experiment.items())),
        }
        return _plain(out)

    def replace(self, **sections) -> "RunConfig":
        return dataclasses.replace(self, **sections)


def _plain(x):
    if isinstance(x, dict):
        return {k: _plain(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_plain(v) for v in x]
    return x


def _per_axis(vals: tuple, n: int, name: str) -> tuple:
    if len(vals) == 1:
        return vals * n
    if len(vals) != n:
        raise ConfigError(f"{name} needs 1 or {n} values, got {len(vals)}")
    return vals


_SECTIONS = ("grid", "physics", "time", "initial", "diagnostics", "output", "run", "experiment")


def _apply_overrides(cp: configparser.ConfigParser, overrides: Sequence[str]) -> None:
    for item in overrides:
        if "=" not in item:
            raise ConfigError(f"override {item!r} is not KEY=VALUE")
        key, value = item.split("=", 1)
        if "." not in key:
            raise ConfigError(f"override key {key!r} must be section.key")
        sec, opt = key.strip().split(".", 1)
        if sec not in _SECTIONS:
            raise ConfigError(f"unknown section {sec!r} in override")
        if not cp.has_section(sec):
            cp.add_section(sec)
        cp.set(sec, opt.strip(), value.strip())


def parse_config_text(
    text: str,
    overrides: Sequence[str] = (),
    seed: Optional[int] = None,
    allow_wraparound: bool = False,
) -> RunConfig:
    cp = configparser.ConfigParser(interpolation=None)
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"malformed config: {exc}") from exc
    for sec in cp.sections():
        if sec not in _SECTIONS:
            raise ConfigError(f"unknown section [{sec}]")
    _apply_overrides(cp, overrides)

    def get(sec, key, conv, default=None, required=False):
        if cp.has_option(sec, key):
            raw = cp.get(sec, key)
            try:
                return conv(raw)
            except ValueError as exc:
                raise ConfigError(f"{sec}.{key}: cannot parse {raw!r}") from exc
        if required:
            raise ConfigError(f"missing required key {sec}.{key}")
        return default

    n = get("grid", "n", int, required=True)
    if not 1 <= n <= 4:
        raise ConfigError(f"grid.n must be 1..4, got {n}")
    points = _per_axis(get("grid", "points", _ints, required=True), n, "grid.points")
    L = _per_axis(get("grid", "L", _floats, required=True), n, "grid.L")
    gcfg = GridConfig(n, points, L, get("grid", "workers", int, 1))
    try:
        grid = gcfg.build()
    except ValueError as exc:
        raise ConfigError(f"grid: {exc}") from exc

    m = get("physics", "m", float, 1.0)
    lam = get("physics", "lambda", float, 1.0)
    p = get("physics", "p", float, 3.0)
    try:
        params = Params(m, lam, p)
    except ValueError as exc:
        raise ConfigError(f"physics: {exc}") from exc

    dt = get("time", "dt", float, required=True)
    T = get("time", "T", float, required=True)
    stride = get("time", "snapshot_stride", int, 1)
    if not dt > 0 or not T >= 0:
        raise ConfigError("time.dt must be > 0 and time.T >= 0")
    if stride < 1:
        raise ConfigError("time.snapshot_stride must be >= 1")
    if abs(round(T / dt) * dt - T) > 1e-9 * max(1.0, T):
        raise ConfigError(f"time.T={T} is not a whole number of steps of dt={dt}")

    kind = get("initial", "kind", str, "gaussian").strip()
    if kind not in INITIAL_KINDS:
        raise ConfigError(f"initial.kind must be one of {INITIAL_KINDS}, got {kind!r}")
    center = get("initial", "center", _floats)
    velocity = get("initial", "velocity", _floats)
    mode = get("initial", "mode", _ints)
    for name, val in (("center", center), ("velocity", velocity), ("mode", mode)):
        if val is not None and len(val) != n:
            raise ConfigError(f"initial.{name} needs {n} values")
    icfg = InitialConfig(
        kind=kind,
        amplitude=get("initial", "amplitude", float, 1.0),
        sigma=get("initial", "sigma", float, 4.0),
        center=center,
        velocity=velocity,
        mode=mode,
        noise=get("initial", "noise", float, 0.0),
        path=get("initial", "path", str),
    )
    if kind == "checkpoint" and not icfg.path:
        raise ConfigError("initial.kind = checkpoint needs initial.path")
    if kind == "single_mode" and mode is None:
        raise ConfigError("initial.kind = single_mode needs initial.mode")
    if icfg.sigma <= 0:
        raise ConfigError("initial.sigma must be positive")

    dcfg = DiagnosticsConfig(
        R=get("diagnostics", "R", float, 8.0),
        delta=get("diagnostics", "delta", float, 0.5),
        v_cap=get("diagnostics", "v_cap", float, 1.0),
        actions=get("diagnostics", "actions", _bool, True),
        ydot=get("diagnostics", "ydot", str, "zero").strip(),
        radius_ladder=get("diagnostics", "radius_ladder", int, 32),
    )
    if dcfg.R <= 0 or not 0 < dcfg.delta < 1 or dcfg.v_cap <= 0:
        raise ConfigError("diagnostics: need R > 0, 0 < delta < 1, v_cap > 0")
    if dcfg.ydot not in ("zero", "track"):
        raise ConfigError("diagnostics.ydot must be 'zero' or 'track'")

    formats = get("output", "formats", lambda s: tuple(s.replace(",", " ").split()), ("csv", "json"))
    ocfg = OutputConfig(get("output", "directory", str, "out"), formats)

    if seed is None:
        seed = get("run", "seed", int, 0)
    allow = allow_wraparound or get("run", "allow_wraparound", _bool, False)

    try:
        check_budget(grid, params.m, T, allow)
    except WraparoundError as exc:
        raise ConfigError(str(exc)) from exc

    experiment = dict(cp.items("experiment")) if cp.has_section("experiment") else {}
    return RunConfig(
        gcfg, params, TimeConfig(dt, T, stride), icfg, dcfg, ocfg, int(seed), bool(allow), experiment
    )


def parse_config(
    path,
    overrides: Sequence[str] = (),
    seed: Optional[int] = None,
    allow_wraparound: bool = False,
) -> RunConfig:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    return parse_config_text(text, overrides, seed, allow_wraparound)


def make_rng(seed: int) -> np.random.Generator:
    """Counter-based Philox stream keyed by ``seed``."""
    return np.random.Generator(np.random.Philox(key=int(seed) & (2**64 - 1)))


def _gaussian(grid: Grid, center, sigma: float) -> np.ndarray:
    r = grid.distance(center)
    return np.exp(-(r * r) / (2.0 * sigma * sigma))


def _noise(grid: Grid, rng: np.random.Generator) -> EnergyState:
    """Smooth random state with unit free energy, band-limited to the dealiased range."""
    kmax = min(grid.nyquist) / 3.0
    mask = grid.kabs <= kmax
    parts = []
    for _ in range(2):
        a = rng.standard_normal(grid.shape)
        parts.append(grid.ifft(grid.fft(a) * mask))
    from .linear import free_energy

    st = EnergyState(grid, parts[0], parts[1])
    e = free_energy(st, 1.0)
    return st * (1.0 / math.sqrt(e)) if e > 0 else st


def build_initial(config: RunConfig) -> EnergyState:
    grid = config.build_grid()
    ic = config.initial
    center = ic.center if ic.center is not None else tuple(0.5 * s for s in grid.side)
    if ic.kind == "checkpoint":
        state, _, _ = read_checkpoint(ic.path)
        if state.grid.points != grid.points or state.grid.side != grid.side:
            raise ConfigError("checkpoint grid does not match [grid]")
        state = EnergyState(grid, state.u, state.v)
    elif ic.kind == "single_mode":
        phase = np.zeros(grid.shape)
        for ax in range(grid.n):
            phase = phase + (2 * math.pi * ic.mode[ax] / grid.side[ax]) * grid.mesh[ax]
        state = EnergyState(grid, ic.amplitude * np.cos(phase), np.zeros(grid.shape))
    else:
        g = ic.amplitude * _gaussian(grid, center, ic.sigma)
        v = np.zeros(grid.shape)
        if ic.kind == "boosted_gaussian":
            vel = ic.velocity if ic.velocity is not None else (1.0,) + (0.0,) * (grid.n - 1)
            for c, d in zip(vel, grid.gradient(g)):
                v = v - c * d
        state = EnergyState(grid, g, v)
    if ic.noise > 0:
        state = state + _noise(grid, make_rng(config.seed)) * ic.noise
    return state
