"""Compare the Cython kernels with the pure-Python fallback.

Usage::

    python3 benchmarks/bench_kernels.py [--repeat N]

Each kernel runs on identical inputs under both backends; the script
prints the best wall time of ``--repeat`` runs, the speed-up and the
largest difference between the two outputs.
"""

import argparse
import math
import time

import numpy as np

from nuedkit import catalog
from nuedkit._kernels import load_backend
from nuedkit.dichotomy import _stable_samples, build_norm_grid
from nuedkit.odeint import _poly_kernel_args


def _best(fn, repeat):
    best, out = math.inf, None
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t0)
    return best, out


def _cases():
    args = _poly_kernel_args(catalog.sec42_map(-1))
    samples = tuple(np.linspace(0.0, 40.0, 401))

    def poly(mod):
        def run():
            _, _, _, xs, *_ = mod.dopri5_poly(*args, 0.0, np.array([2.0, -1.0, 1.5]), 40.0, 1e-10, 1e-12,
                                              math.inf, 1e12, samples, False)
            return xs

        return run

    s = _stable_samples(build_norm_grid(catalog.example_3_4_field(-4.0, -1.0), 60.0, 0.25))

    def envelope(mod):
        def run():
            return np.array([mod.envelope_max(s.logn, s.d, s.tau, s.late, a, e, s.split)[0]
                             for a, e in zip(np.linspace(0.5, 4.0, 200), np.linspace(0.0, 3.0, 200))])

        return run

    return [("dopri5_poly (sec42, 401 samples)", poly), (f"envelope_max ({s.logn.size} pairs x 200)", envelope)]


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args(argv)
    py = load_backend("python")
    try:
        cy = load_backend("cython")
    except ImportError:
        print("Cython extension not built; run `pip install -e . --no-build-isolation` first")
        return 1
    print(f"{'kernel':40s} {'cython [s]':>11s} {'python [s]':>11s} {'speed-up':>9s} {'max diff':>9s}")
    for name, make in _cases():
        tc, oc = _best(make(cy), args.repeat)
        tp, op = _best(make(py), args.repeat)
        diff = float(np.max(np.abs(np.asarray(oc) - np.asarray(op))))
        print(f"{name:40s} {tc:11.4f} {tp:11.4f} {tp / tc:8.1f}x {diff:9.1e}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
