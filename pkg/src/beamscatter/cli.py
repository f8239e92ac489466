"""Command-line runner: one experiment per invocation.

Exit status is 0 when every assertion of the experiment holds, 1 when one
fails and 2 on a configuration error.  Each run writes into ``--out`` (or
``output.directory``) a ``summary.json``, one CSV table and, for
subcommands that integrate the equation, a ``final.ckpt`` checkpoint.
"""

from __future__ import annotations

import argparse
import math
import sys
from pathlib import Path
from typing import Callable, Optional, Sequence

import numpy as np

from .bernstein import bernstein_suite
from .checkpoint import write_checkpoint
from .config import ConfigError, RunConfig, build_initial, make_rng, parse_config
from .diagnostics import center_velocity, compute_records, smooth_center, track_center
from .linear import dispersion_omega, free_energy
from .profiles import (
    energy_tail,
    extract_profiles,
    lp_decoupling_check,
    orthogonality_matrix,
    pythagorean_check,
    synthesize_sequence,
    synthetic_profiles,
)
from .reporting import write_csv, write_json
from .scattering import cauchy_test, perturbation_experiment, scattering_verdict, small_data_experiment
from .solver import WraparoundError, momentum, simulate, total_energy
from .virial import Cutoff, boundary_integrand, orthogonal_direction, virial_series

__all__ = ["SUBCOMMANDS", "run", "main", "build_parser", "experiment_settings", "profile_round_trip"]

EXIT_OK, EXIT_FAIL, EXIT_CONFIG = 0, 1, 2


def _floats(text: str) -> tuple:
    return tuple(float(t) for t in str(text).replace(",", " ").split())


# Settings each subcommand reads from [experiment], with defaults.
_SETTINGS: dict = {
    "simulate": {"closed_form_tol": (float, 1e-9)},
    "virial-check": {"virial_tol": (float, 1e-2)},
    "scatter-test": {
        "scatter_tol": (float, None),
        "window": (float, None),
        "tail_fraction": (float, 0.1),
    },
    "small-data": {"amplitudes": (_floats, (0.25, 0.5, 1.0)), "bound": (float, 2.0)},
    "perturb": {"deltas": (_floats, (1e-3, 2e-3, 4e-3)), "band_lo": (float, 0.3), "band_hi": (float, 3.0)},
    "profiles": {
        "count": (int, 3),
        "width": (float, 1.5),
        "offset": (float, 9.0),
        "growth": (float, 2.0),
        "length": (int, 4),
        "shift": (float, 1.0),
        "noise_fraction": (float, 0.01),
        "r_cap": (float, 3.0),
        "shift_step": (float, 0.25),
        "shift_max": (float, 1.5),
        "pythagorean_tol": (float, 0.02),
        "energy_tol": (float, 0.02),
        "decoupling_time": (float, 0.0),
        "min_gap_widths": (float, 8.0),
    },
    "lp-test": {"fields": (int, 100), "s_values": (_floats, (0.5, 1.0, 2.0)), "ratio_bound": (float, 10.0)},
}

SUBCOMMANDS = tuple(_SETTINGS)


def experiment_settings(command: str, config: RunConfig) -> dict:
    """The ``[experiment]`` keys of ``command`` with defaults filled in."""
    known = _SETTINGS[command]
    unknown = sorted(set(config.experiment) - set(known))
    if unknown:
        raise ConfigError(f"{command}: unknown [experiment] keys {unknown}; known: {sorted(known)}")
    out = {}
    for key, (conv, default) in known.items():
        if key in config.experiment:
            try:
                out[key] = conv(config.experiment[key])
            except ValueError as exc:
                raise ConfigError(f"experiment.{key}: cannot parse {config.experiment[key]!r}") from exc
        else:
            out[key] = default
    return out


class _Writer:
    def __init__(self, command: str, config: RunConfig, settings: dict, out: Path):
        self.command = command
        self.config = config
        self.out = out
        self.header = {"subcommand": command, "config": config.resolved(), "settings": settings}
        self.formats = set(config.output.formats)

    def table(self, name: str, rows) -> None:
        if "csv" in self.formats:
            write_csv(self.out / f"{name}.csv", rows, self.header, kind=name)

    def summary(self, assertions: dict, report: dict) -> int:
        passed = bool(all(assertions.values()))
        if "json" in self.formats:
            write_json(
                self.out / "summary.json",
                {"assertions": assertions, "passed": passed, "report": report},
                self.header,
            )
        return EXIT_OK if passed else EXIT_FAIL

    def checkpoint(self, traj) -> None:
        write_checkpoint(self.out / "final.ckpt", traj.states[-1], traj.params, float(traj.times[-1]))


def _records(traj, config: RunConfig, extra: Optional[dict] = None) -> list:
    d = config.diagnostics
    return [r.row() for r in compute_records(traj, d.R, d.v_cap, extra)]


def _energy_report(traj) -> dict:
    E = np.array([total_energy(s, traj.params) for s in traj.states])
    drift = float(np.max(np.abs(E - E[0])) / abs(E[0])) if E[0] != 0 else 0.0
    return {"E_initial": float(E[0]), "E_final": float(E[-1]), "relative_energy_drift": drift}


def _closed_form_error(traj, config: RunConfig) -> Optional[float]:
    """Sup error against ``A cos(k.x) cos(omega t)`` for the linear single-mode run."""
    ic = config.initial
    if config.params.lam != 0 or ic.kind != "single_mode" or ic.noise > 0:
        return None
    g = traj.grid
    kvec = [2 * math.pi * ic.mode[ax] / g.side[ax] for ax in range(g.n)]
    phase = sum(k * x for k, x in zip(kvec, g.mesh))
    omega = float(dispersion_omega(math.sqrt(sum(k * k for k in kvec)), config.params.m))
    err = 0.0
    for t, st in zip(traj.times, traj.states):
        exact = ic.amplitude * np.cos(phase) * math.cos(omega * t)
        err = max(err, float(np.max(np.abs(st.u - exact))))
    return err / max(abs(ic.amplitude), 1e-300)


def _cmd_simulate(config: RunConfig, s: dict, w: _Writer) -> int:
    traj = simulate(config)
    extra = None
    if config.diagnostics.actions:
        extra = _virial_columns(traj, config)
    w.table("diagnostics", _records(traj, config, extra))
    w.checkpoint(traj)
    report = _energy_report(traj)
    finite = all(np.isfinite(st.u).all() and np.isfinite(st.v).all() for st in traj.states)
    assertions = {"finite": bool(finite)}
    err = _closed_form_error(traj, config)
    if err is not None:
        report["closed_form_error"] = err
        assertions["closed_form"] = bool(err <= s["closed_form_tol"])
    return w.summary(assertions, report)


def _centres(traj, config: RunConfig):
    d = config.diagnostics
    if d.ydot == "zero":
        return None, None
    track = track_center(traj, d.R, traj.params.m)
    ytil = smooth_center(track.times, track.y, d.v_cap)
    return ytil, center_velocity(track.times, ytil)


def _virial_columns(traj, config: RunConfig) -> dict:
    centers, ydots = _centres(traj, config)
    pairs = [(i, j) for i in range(traj.grid.n) for j in range(i + 1, traj.grid.n)]
    return virial_series(traj, config.diagnostics.R, centers, ydots, pairs=pairs)


def _cmd_virial(config: RunConfig, s: dict, w: _Writer) -> int:
    traj = simulate(config)
    cols = _virial_columns(traj, config)
    w.table("virial", _records(traj, config, cols))
    w.checkpoint(traj)
    g = traj.grid
    R = config.diagnostics.R
    centers, ydots = _centres(traj, config)
    names = ["J", "Ia", "A"] + (["A2"] if g.n >= 2 else [])
    pairs = [(i, j) for i in range(g.n) for j in range(i + 1, g.n)]
    direction = orthogonal_direction(momentum(traj.states[0])) if g.n >= 2 else None
    inside_zero = True
    for k, st in enumerate(traj.states):
        cut = Cutoff(R).at(centers[k]) if centers is not None else Cutoff(R)
        yd = ydots[k] if ydots is not None else None
        ball = cut.fields(g).rho <= R
        for name in names:
            vals = boundary_integrand(name, st, cut, traj.params, yd, direction)
            inside_zero &= bool(np.all(vals[ball] == 0.0))
        for pr in pairs:
            vals = boundary_integrand("Rij", st, cut, traj.params, yd, pair=pr)
            inside_zero &= bool(np.all(vals[ball] == 0.0))
    residuals = {k: float(np.nanmax(v)) for k, v in cols.items() if k.startswith("res_")}
    assertions = {f"{k}_within_tol": bool(v <= s["virial_tol"]) for k, v in residuals.items()}
    assertions["boundary_zero_in_ball"] = inside_zero
    report = {"max_residuals": residuals, **_energy_report(traj)}
    return w.summary(assertions, report)


def _cmd_scatter(config: RunConfig, s: dict, w: _Writer) -> int:
    traj = simulate(config)
    w.table("diagnostics", _records(traj, config))
    w.checkpoint(traj)
    verdict = scattering_verdict(traj, s["scatter_tol"], s["window"], s["tail_fraction"])
    T = float(traj.times[-1])
    horizons = [traj.times[int(np.argmin(np.abs(traj.times - f * T)))] for f in (0.25, 0.5, 0.75, 1.0)]
    horizons = sorted(set(float(h) for h in horizons))
    report = {"verdict": verdict, "horizons": horizons}
    if len(horizons) >= 2:
        report["cauchy_gaps"] = cauchy_test(traj, horizons)
    assertions = {"pullback_gap": verdict["gap_ok"], "tail_window": verdict["tail_ok"]}
    return w.summary(assertions, report)


def _cmd_small_data(config: RunConfig, s: dict, w: _Writer) -> int:
    t = config.time
    res = small_data_experiment(
        build_initial(config), config.params, t.dt, t.T, s["amplitudes"], t.snapshot_stride,
        s["bound"], config.allow_wraparound,
    )
    w.table("small_data", res["rows"])
    return w.summary({"smallest_ratio_bounded": res["passed"]}, res)


def _cmd_perturb(config: RunConfig, s: dict, w: _Writer) -> int:
    t = config.time
    res = perturbation_experiment(
        build_initial(config), config.params, t.dt, t.T, s["deltas"], stride=t.snapshot_stride,
        band=(s["band_lo"], s["band_hi"]), allow_wraparound=config.allow_wraparound,
    )
    w.table("perturb", res["rows"])
    return w.summary({"response_linear_in_delta": res["passed"]}, res)


def profile_round_trip(grid, m: float, p: float, seed: int, s: dict) -> dict:
    """Synthesize, extract and score a profile sequence; shared by the CLI and the tests."""
    truth = synthetic_profiles(grid, s["count"], s["width"], s["offset"], s["growth"], s["length"], s["shift"])
    E_min = min(free_energy(pr.data, m) for pr in truth)
    noise = math.sqrt(s["noise_fraction"] * E_min)
    seq = synthesize_sequence(truth, noise, m, seed=seed, min_gap=s["min_gap_widths"] * s["width"])
    S_grid = np.arange(-s["shift_max"], s["shift_max"] + 0.5 * s["shift_step"], s["shift_step"])
    found, rems, info = extract_profiles(seq, S_grid, s["r_cap"], m)
    side = np.array(grid.side)
    cell = max(grid.dx)
    errors = []
    energy_errors = []
    for a, pr in enumerate(truth):
        worst = 0.0
        match = None
        for k, core in enumerate(pr.cores):
            best = math.inf
            for f in found:
                c = f.cores[k]
                if c is None:
                    continue
                dy = (np.subtract(c.Y, core.Y) + side / 2) % side - side / 2
                err = max(abs(c.S - core.S) / s["shift_step"], float(np.linalg.norm(dy)) / cell)
                if err < best:
                    best, match = err, f
            worst = max(worst, best)
        errors.append(worst)
        E_true = free_energy(pr.data, m)
        energy_errors.append(math.inf if match is None else abs(free_energy(match.data, m) - E_true) / E_true)
    pyth = pythagorean_check(seq, found, rems, m, s["pythagorean_tol"])
    dec = lp_decoupling_check(seq, found, s["decoupling_time"], p, m)
    cores = []
    for a, f in enumerate(found):
        for k, c in enumerate(f.cores):
            row = {"profile": a, "k": k, "S": math.nan if c is None else c.S}
            for ax in range(grid.n):
                row[f"Y_{ax + 1}"] = math.nan if c is None else c.Y[ax]
            cores.append(row)
    N_tail = 2.0 / s["width"]
    return {
        "true_count": len(truth),
        "found_count": len(found),
        "core_errors_in_cells_or_strides": errors,
        "cores_recovered": bool(len(found) == len(truth) and all(e <= 1.0 for e in errors)),
        "profile_energy_errors": energy_errors,
        "energies_recovered": bool(all(e <= s["energy_tol"] for e in energy_errors)),
        "min_true_separation": orthogonality_matrix(truth)["min_separation_last"],
        "min_true_separation_first": float(
            np.nanmin(orthogonality_matrix(truth)["separations"][:, :, 0][~np.eye(len(truth), dtype=bool)])
        ),
        "pythagorean": pyth,
        "decoupling": dec,
        "energy_tail_N": N_tail,
        "energy_tails": [energy_tail(pr.data, 4 * N_tail, m) for pr in truth],
        "extraction_scores": info["scores"],
        "cores": cores,
    }


def _cmd_profiles(config: RunConfig, s: dict, w: _Writer) -> int:
    g = config.build_grid()
    res = profile_round_trip(g, config.params.m, config.params.p, config.seed, s)
    w.table("cores", res.pop("cores"))
    assertions = {
        "cores_recovered": res["cores_recovered"],
        "profile_energies": res["energies_recovered"],
        "pythagorean": res["pythagorean"]["passed"],
        "decoupling_decreasing": res["decoupling"]["decreasing"],
    }
    return w.summary(assertions, res)


def _cmd_lp(config: RunConfig, s: dict, w: _Writer) -> int:
    g = config.build_grid()
    res = bernstein_suite(g, s["fields"], s["s_values"], rng=make_rng(config.seed), ratio_bound=s["ratio_bound"])
    rows = []
    for f in res["fits"]:
        for N, c in zip(f["N"], f["constants"]):
            rows.append({"family": f["family"], "s": f["s"], "q": f["q"], "N": N, "constant": c})
    w.table("bernstein", rows)
    return w.summary({"constants_uniform_in_N": res["passed"]}, res)


_COMMANDS: dict[str, Callable] = {
    "simulate": _cmd_simulate,
    "virial-check": _cmd_virial,
    "scatter-test": _cmd_scatter,
    "small-data": _cmd_small_data,
    "perturb": _cmd_perturb,
    "profiles": _cmd_profiles,
    "lp-test": _cmd_lp,
}


def run(command: str, config: RunConfig, out: Optional[Path] = None) -> int:
    """Run one subcommand and write its artifacts; returns the exit status."""
    if command not in _COMMANDS:
        raise ConfigError(f"unknown subcommand {command!r}; choose from {SUBCOMMANDS}")
    settings = experiment_settings(command, config)
    out = Path(config.output.directory if out is None else out)
    out.mkdir(parents=True, exist_ok=True)
    return _COMMANDS[command](config, settings, _Writer(command, config, settings, out))


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="beamscatter", description=__doc__.splitlines()[0])
    ap.add_argument("subcommand", choices=SUBCOMMANDS)
    ap.add_argument("--config", required=True, help="INI run configuration")
    ap.add_argument("--override", action="append", default=[], metavar="KEY=VALUE",
                    help="section.key=value, repeatable")
    ap.add_argument("--out", help="output directory (default: output.directory)")
    ap.add_argument("--seed", type=int, help="seed for all random data")
    ap.add_argument("--allow-wraparound", action="store_true",
                    help="run even when waves can cross the periodic box")
    return ap


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        config = parse_config(args.config, args.override, args.seed, args.allow_wraparound)
        return run(args.subcommand, config, Path(args.out) if args.out else None)
    except (ConfigError, WraparoundError) as exc:
        print(f"beamscatter: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
