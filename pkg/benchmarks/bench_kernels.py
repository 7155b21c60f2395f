"""Time the Verlet inner loop with the numba and numpy backends.

    python benchmarks/bench_kernels.py [--n 4001] [--steps 2000] [--repeat 3]

The numba path is warmed up once (compilation excluded).  Both backends start
from the same perturbed kink state and the script checks that they agree.
"""

import argparse
import time

import numpy as np

from tricrystal import _kernels
from tricrystal.graph import EdgeGrid, YGraphSpec
from tricrystal.profiles import make_family


def setup(n):
    grid = EdgeGrid(40.0, n)
    spec = YGraphSpec((1.0, 1.0, 1.0), -4.0)
    fam = make_family("kink", spec)
    bg = np.ascontiguousarray(fam.sample(grid).values)
    x = grid.nodes
    P0 = np.tile(1e-3 * np.exp(-(x - 5.0) ** 2), (3, 1))
    P0[:, -1] = 0.0
    return grid, spec, bg, P0


def run(backend, n, steps, repeat):
    grid, spec, bg, P0 = setup(n)
    name, verlet, accel = _kernels.get_backend(backend)
    h = grid.spacing
    dt = 0.4 * h
    args = (spec.c, h, 1.0 / spec.lam, False)
    best = np.inf
    for r in range(repeat + 1):
        P = P0.copy()
        Q = np.zeros_like(P)
        a = accel(P, bg, *args, _kernels.MODE_WEAK)
        t = time.perf_counter()
        verlet(P, Q, bg, spec.c, h, dt, steps, _kernels.MODE_WEAK, 1.0 / spec.lam, False, np.zeros((3, 3)), a)
        el = time.perf_counter() - t
        if r > 0:  # first pass compiles / warms caches
            best = min(best, el)
    return best, P


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--n", type=int, default=4001)
    ap.add_argument("--steps", type=int, default=2000)
    ap.add_argument("--repeat", type=int, default=3)
    a = ap.parse_args()

    results = {}
    for backend in ("numpy", "numba"):
        if backend == "numba" and not _kernels.HAVE_NUMBA:
            print("numba unavailable, skipping")
            continue
        t, P = run(backend, a.n, a.steps, a.repeat)
        results[backend] = (t, P)
        upd = 3 * a.n * a.steps / t
        print(f"{backend:6s} {t:8.3f} s  {upd / 1e6:8.1f} Mnode-steps/s")
    if len(results) == 2:
        diff = np.max(np.abs(results["numba"][1] - results["numpy"][1]))
        print(f"speedup {results['numpy'][0] / results['numba'][0]:.1f}x, max |P_numba - P_numpy| = {diff:.2e}")


if __name__ == "__main__":
    main()
