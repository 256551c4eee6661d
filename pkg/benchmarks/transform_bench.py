"""Timing comparison of the two transform routes and two stepping layouts.

Run:  python benchmarks/transform_bench.py [M ...]

Compares the DST-backed transforms against the O(M^2) direct-summation
oracle (the correctness fallback), and batched ensemble stepping against a
per-trajectory Python loop at equal trajectory counts.
"""

import sys
import time

import numpy as np

from glnls import models as md
from glnls import noise as nz
from glnls.spectral import to_physical, to_physical_direct


def timeit(f, repeat=5):
    best = np.inf
    for _ in range(repeat):
        t0 = time.perf_counter()
        f()
        best = min(best, time.perf_counter() - t0)
    return best


def bench_transforms(M: int, batch: int = 256):
    rng = np.random.default_rng(0)
    a = rng.standard_normal((batch, M)) + 1j * rng.standard_normal((batch, M))
    t_fast = timeit(lambda: to_physical(a))
    t_direct = timeit(lambda: to_physical_direct(a))
    err = np.max(np.abs(to_physical(a) - to_physical_direct(a)))
    print(f"M={M:4d} batch={batch}: dst {t_fast * 1e3:8.2f} ms   "
          f"direct {t_direct * 1e3:8.2f} ms   speedup {t_direct / t_fast:6.1f}x   "
          f"max|diff| {err:.2e}")


def bench_stepping(M: int = 64, n_traj: int = 256, n_steps: int = 200):
    params = md.ModelParams(gamma=0.05, alpha=1.0, M=M)
    integ = md.IntegratorConfig(dt=1e-3, record_every=n_steps)
    spec = nz.NoiseSpec.power_profile(8, 0.05, 2.0)
    u0 = np.zeros(M, complex)

    def batched():
        md.simulate_ensemble(u0, params, integ, spec, n_steps * integ.dt, seed=1,
                             traj_ids=np.arange(n_traj))

    def looped():
        for i in range(n_traj):
            md.simulate_ensemble(u0, params, integ, spec, n_steps * integ.dt,
                                 seed=1, traj_ids=np.array([i]))

    t_b = timeit(batched, repeat=2)
    t_l = timeit(looped, repeat=1)
    print(f"stepping M={M} x {n_traj} trajectories x {n_steps} steps: "
          f"batched {t_b:6.2f} s   per-trajectory loop {t_l:6.2f} s   "
          f"speedup {t_l / t_b:4.1f}x")


if __name__ == "__main__":
    sizes = [int(x) for x in sys.argv[1:]] or [16, 64, 256, 1024]
    for M in sizes:
        bench_transforms(M)
    bench_stepping()
