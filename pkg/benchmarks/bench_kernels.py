"""Compare the compiled and NumPy path-enumeration kernels.

    python benchmarks/bench_kernels.py [--repeat 3]

Each case scores a batch of random feedback encoders with ``batch_error``
(the inner loop of the exhaustive search), checks both backends agree and
prints the best wall time of each.
"""

import argparse
import time

import numpy as np

from nfdp import kernels
from nfdp.policy import stage_offsets

CASES = [
    # (M, X, Y, Z, n, batch)
    (2, 2, 2, 2, 3, 4096),
    (2, 2, 2, 2, 4, 4096),
    (3, 3, 3, 3, 2, 4096),
    (3, 2, 2, 2, 4, 2048),
    (2, 3, 3, 3, 3, 1024),
]


def make_case(M, X, Y, Z, n, batch, seed=0):
    rng = np.random.default_rng(seed)
    offsets = stage_offsets(M, Z, n)
    flat = rng.integers(X, size=(batch, int(offsets[-1])))
    Qf = rng.dirichlet(np.ones(Y), size=X)
    Qb = rng.dirichlet(np.ones(Z), size=Y)
    return flat, offsets, M, Z, n, Qf, Qb, np.full(M, 1.0 / M)


def best_time(fn, args, repeat):
    times = []
    for _ in range(repeat):
        start = time.perf_counter()
        out = fn(*args)
        times.append(time.perf_counter() - start)
    return min(times), out


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--repeat", type=int, default=3)
    args = parser.parse_args(argv)
    if kernels.compiled_backend is None:
        print("compiled extension not available; only the NumPy backend will run")
    print(f"{'M X Y Z n':>10} {'batch':>6} {'numpy s':>9} {'cython s':>9} {'speedup':>8} {'max diff':>9}")
    for case in CASES:
        a = make_case(*case)
        t_py, e_py = best_time(kernels.python_backend.batch_error, a, args.repeat)
        if kernels.compiled_backend is None:
            print(f"{' '.join(map(str, case[:5])):>10} {case[5]:>6} {t_py:9.4f}")
            continue
        t_c, e_c = best_time(kernels.compiled_backend.batch_error, a, args.repeat)
        diff = float(np.max(np.abs(e_py - e_c)))
        print(f"{' '.join(map(str, case[:5])):>10} {case[5]:>6} {t_py:9.4f} {t_c:9.4f} {t_py / t_c:8.1f} {diff:9.1e}")


if __name__ == "__main__":
    main()
