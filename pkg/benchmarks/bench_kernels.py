"""Timing comparison of the compiled kernels against the numpy fallback.

Run:  python3 benchmarks/bench_kernels.py [--sizes 65536,262144]

Each kernel is timed in both backends on identical inputs; the table
reports the median of repeated runs and the speedup. Results depend on
the machine; the point is the ratio, not the absolute numbers.
"""

import argparse
import time
import statistics

import numpy as np

from pasim._kernels import BACKEND, _ref

if BACKEND != "compiled":
    raise SystemExit(
        "compiled kernels are not available in this environment; "
        "build the package first (pip install -e . --no-build-isolation)")

from pasim._kernels import _core


def _time(fn, *args, repeats=7):
    best = []
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn(*args)
        best.append(time.perf_counter() - t0)
    return statistics.median(best)


def bench_nl_phase_rotate(n, rng):
    ex = rng.standard_normal(n) + 1j * rng.standard_normal(n)
    ey = rng.standard_normal(n) + 1j * rng.standard_normal(n)
    factor = 1.3e-3 * 0.1
    return (_time(_ref.nl_phase_rotate, ex.copy(), ey.copy(), factor),
            _time(_core.nl_phase_rotate, ex.copy(), ey.copy(), factor))


def bench_bps_best_angle(n, rng):
    r = (rng.standard_normal(n) + 1j * rng.standard_normal(n)) * 3.0
    angles = np.linspace(-np.pi / 4, np.pi / 4, 64, endpoint=False)
    phasors = np.exp(1j * angles)
    return (_time(_ref.bps_best_angle, r, phasors, 32, 15.0, repeats=3),
            _time(_core.bps_best_angle, r, phasors, 32, 15.0, repeats=3))


def bench_unwrap_track(n, rng):
    raw = rng.uniform(-np.pi / 4, np.pi / 4, n)
    return (_time(_ref.unwrap_track, raw, np.pi / 2),
            _time(_core.unwrap_track, raw, np.pi / 2))


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--sizes", default="65536,262144",
                    help="comma-separated input lengths")
    args = ap.parse_args()
    sizes = [int(s) for s in args.sizes.split(",")]
    rng = np.random.default_rng(0)

    print(f"{'kernel':<18} {'n':>8} {'python':>10} {'compiled':>10} "
          f"{'speedup':>8}")
    for n in sizes:
        for name, fn in (("nl_phase_rotate", bench_nl_phase_rotate),
                         ("bps_best_angle", bench_bps_best_angle),
                         ("unwrap_track", bench_unwrap_track)):
            t_py, t_c = fn(n, rng)
            print(f"{name:<18} {n:>8} {t_py * 1e3:>8.2f}ms "
                  f"{t_c * 1e3:>8.2f}ms {t_py / t_c:>7.1f}x")


if __name__ == "__main__":
    main()
