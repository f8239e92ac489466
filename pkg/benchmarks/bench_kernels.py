"""Compare the compiled and numpy kernel backends.

Times each hot kernel on its own and one full integration, per backend,
and prints a table.  Usage::

    python3 benchmarks/bench_kernels.py [--points 256] [--repeat 20]
"""

from __future__ import annotations

import argparse
import importlib
import timeit

import numpy as np


def _backends():
    out = {"python": importlib.import_module("beamscatter._kernels_py")}
    try:
        out["cython"] = importlib.import_module("beamscatter._kernels")
    except ImportError:
        print("compiled kernels not built; timing the numpy backend only")
    return out


def _kernel_cases(mod, points: int, rng):
    u = rng.standard_normal((points, points))
    v = rng.standard_normal((points, points))
    uh = np.fft.rfft2(u)
    vh = np.fft.rfft2(v)
    c, sw, ws = (rng.standard_normal(uh.shape) for _ in range(3))
    return {
        "nonlinear_kick p=3": lambda: mod.nonlinear_kick(u, v, 1e-3, 3.0),
        "nonlinear_kick p=2.5": lambda: mod.nonlinear_kick(u, v, 1e-3, 2.5),
        "linear_rotate": lambda: mod.linear_rotate(uh, vh, c, sw, ws),
        "power_sum q=4": lambda: mod.power_sum(u, 4.0),
        "power_sum q=3.5": lambda: mod.power_sum(u, 3.5),
    }


def _integrate_case(points: int, steps: int):
    from beamscatter import solver
    from beamscatter.grid import Grid
    from beamscatter.linear import EnergyState, Params

    g = Grid.cube(2, points, float(points))
    r = g.distance([points / 2.0, points / 2.0])
    st = EnergyState(g, np.exp(-r * r / 32.0), np.zeros(g.shape))
    prm = Params(1.0, 1.0, 3.0)
    return lambda: solver.integrate(st, prm, 0.01, 0.01 * steps, stride=steps)


def main(argv=None) -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--points", type=int, default=256)
    ap.add_argument("--repeat", type=int, default=20)
    ap.add_argument("--steps", type=int, default=50)
    args = ap.parse_args(argv)

    from beamscatter import kernels, solver

    backends = _backends()
    rows = {}
    for name, mod in backends.items():
        cases = _kernel_cases(mod, args.points, np.random.default_rng(0))
        for label, fn in cases.items():
            rows.setdefault(label, {})[name] = min(timeit.repeat(fn, number=1, repeat=args.repeat))
        saved = solver.kernels.nonlinear_kick, solver.kernels.linear_rotate
        solver.kernels.nonlinear_kick, solver.kernels.linear_rotate = mod.nonlinear_kick, mod.linear_rotate
        try:
            fn = _integrate_case(args.points, args.steps)
            label = f"integrate {args.steps} steps"
            rows.setdefault(label, {})[name] = min(timeit.repeat(fn, number=1, repeat=3))
        finally:
            solver.kernels.nonlinear_kick, solver.kernels.linear_rotate = saved

    names = list(backends)
    print(f"grid {args.points}^2, default backend: {kernels.BACKEND}")
    print(f"{'case':<24}" + "".join(f"{n + ' [ms]':>16}" for n in names) + ("     speedup" if len(names) == 2 else ""))
    for label, t in rows.items():
        line = f"{label:<24}" + "".join(f"{1e3 * t[n]:>16.3f}" for n in names)
        if len(names) == 2:
            line += f"{t['python'] / t['cython']:>12.2f}"
        print(line)


if __name__ == "__main__":
    main()
