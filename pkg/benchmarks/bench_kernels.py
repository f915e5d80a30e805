"""Time the compiled and numpy kernel backends side by side.

Usage::

    python3 benchmarks/bench_kernels.py [--repeat 5] [--skip-filter]

Each row reports the best wall time over ``--repeat`` runs per backend and
the speedup of the compiled backend.  The last row runs the default
scenario end to end through the filter.
"""

import argparse
import time

import numpy as np

from minplus_filter import config as cfgmod
from minplus_filter import kernels
from minplus_filter.cli import run_experiment, simulate
from minplus_filter.minplus import lattice
from minplus_filter.quadform import QuadraticForm


def random_mats(rng, K, n):
    mats = []
    for _ in range(K):
        M = rng.normal(size=(n, n))
        N = M @ M.T + 0.5 * np.eye(n)
        c = rng.uniform(-2, 2, size=n)
        mats.append(QuadraticForm.from_blocks(N, -N @ c, c @ N @ c).mat)
    return np.stack(mats)


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        start = time.perf_counter()
        fn()
        times.append(time.perf_counter() - start)
    return min(times)


def cases(rng):
    mats = random_mats(rng, 1152, 2)  # one default-scenario step before pruning
    grid = lattice([-1, -np.pi], [1, np.pi], 21)
    dense = lattice([-1, -np.pi], [1, np.pi], 101)
    yield "eval_forms 1152 forms x 441 pts", lambda mod: mod.eval_forms(mats, grid, 0)
    yield "min_stats 1152 forms x 441 pts", lambda mod: mod.min_stats(mats, grid, 0)
    yield "min_stats 1152 forms x 10201 pts", lambda mod: mod.min_stats(mats, dense, 0)

    count = 161
    lo, hi = np.array([-2.0, -2.0]), np.array([2.0, 2.0])
    pts = lattice(lo, hi, count)
    args = (
        (pts**2).sum(axis=1),
        lo,
        (hi - lo) / (count - 1),
        np.full(2, count, dtype=np.int64),
        pts,
        np.array([[1.0, 0.0], [-0.1, 1.0]]),
        np.zeros(2),
        np.array([-0.1, 0.0]),
        np.linspace(-5, 5, 101),
        0.5 * np.linspace(-5, 5, 101) ** 2,
        1e9,
    )
    yield "dp_sweep 161^2 states x 101 w", lambda mod: mod.dp_sweep(*args, 0)


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--skip-filter", action="store_true", help="skip the end-to-end filter run")
    args = ap.parse_args(argv)

    backends = kernels.available_backends()
    names = [n for n in ("python", "cython") if n in backends]
    if "cython" not in backends:
        print("compiled backend not available; showing numpy timings only")
    print(f"{'case':36s}" + "".join(f"{n:>12s}" for n in names) + ("    speedup" if len(names) == 2 else ""))

    rng = np.random.default_rng(0)
    for label, run in cases(rng):
        secs = [best_of(lambda: run(backends[n]), args.repeat) for n in names]
        row = f"{label:36s}" + "".join(f"{s * 1e3:10.2f}ms" for s in secs)
        if len(secs) == 2:
            row += f"  {secs[0] / secs[1]:8.1f}x"
        print(row)

    if not args.skip_filter:
        exp = cfgmod.from_file(cfgmod.shipped("default"))
        rec = simulate(exp)
        secs = []
        for n in names:
            kernels.use_backend(n)
            secs.append(min(run_experiment(exp, rec, with_sets=False).seconds for _ in range(max(1, args.repeat // 2))))
        row = f"{'filter, default scenario (200 steps)':36s}" + "".join(f"{s:11.2f}s" for s in secs)
        if len(secs) == 2:
            row += f"  {secs[0] / secs[1]:8.1f}x"
        print(row)


if __name__ == "__main__":
    main()
