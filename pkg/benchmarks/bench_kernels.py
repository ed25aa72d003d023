"""Time the numba and numpy variants of every kernel on representative inputs.

    python3 benchmarks/bench_kernels.py [--repeat 5]

The first numba call compiles (or loads the on-disk cache); it is timed
separately and excluded from the steady-state figures.
"""

import argparse
import time

import numpy as np

from robust_persuasion import _kernels as K
from robust_persuasion.instances import direct_revelation_example, random_instance
from robust_persuasion.model import _offset


def cases():
    inst = random_instance(4, 8, 0.1, seed=1)
    mus = K.compositions(4, 40) / 40.0  # 12341 posteriors
    yield "evaluate_posteriors (12341 x 8)", "evaluate_posteriors", (
        mus, inst.sender_utility, inst.receiver_utility, _offset(0.1, 0.0), 1e-12)
    yield "compositions (m=4, k=60)", "compositions", (4, 60)
    ex = direct_revelation_example(0.01)
    pts = K.compositions(3, 50) / 50.0
    _, _, f, _ = K.NUMPY_KERNELS["evaluate_posteriors"](
        pts, ex.sender_utility, ex.receiver_utility, _offset(1.0, 0.0), 1e-12)
    yield "best_split (1326 points, <= 2)", "best_split", (pts, f, ex.prior, 2, 1e-9)
    rng = np.random.default_rng(0)
    A = rng.random((40, 120))
    b = A @ rng.random(120)
    c = rng.standard_normal(120)
    A = np.hstack([A, np.eye(40)])  # keep it bounded through slack columns
    c = np.concatenate([np.abs(c), np.zeros(40)])
    yield "simplex (40 x 160 dense)", "simplex", (A, b, c, 1e-9, 50_000)


def timeit(fn, args, repeat):
    best = np.inf
    for _ in range(repeat):
        t = time.perf_counter()
        fn(*args)
        best = min(best, time.perf_counter() - t)
    return best


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()
    if not K.HAVE_NUMBA:
        print("numba is not installed; only the numpy path can run")
    print(f"{'kernel':36s} {'numpy [s]':>11s} {'numba [s]':>11s} {'compile [s]':>12s} {'speedup':>8s}")
    for name, key, a in cases():
        t_np = timeit(K.NUMPY_KERNELS[key], a, args.repeat)
        if K.HAVE_NUMBA:
            t0 = time.perf_counter()
            K.NUMBA_KERNELS[key](*a)
            t_c = time.perf_counter() - t0
            t_nb = timeit(K.NUMBA_KERNELS[key], a, args.repeat)
            print(f"{name:36s} {t_np:11.5f} {t_nb:11.5f} {t_c:12.3f} {t_np / t_nb:8.1f}")
        else:
            print(f"{name:36s} {t_np:11.5f} {'-':>11s} {'-':>12s} {'-':>8s}")


if __name__ == "__main__":
    main()
