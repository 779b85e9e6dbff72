"""Time the compiled kernels against the numpy/LAPACK fallback.

    python3 benchmarks/bench_kernels.py [--sizes 4,8,16,32,64,128] [--repeat 5]

Prints one row per (kernel, n) with the best-of-``repeat`` time per call for
each backend and the python/compiled ratio (> 1 means compiled is faster).
"""

import argparse
import timeit

import numpy as np

from relaycap import linalg


def _inputs(n, rng):
    a = (rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))) / np.sqrt(2)
    b = (rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))) / np.sqrt(2)
    r_s = linalg.scaled_gram(a, 1.0 / n)
    r_n = linalg.scaled_gram(b, 1.0 / n) + np.eye(n)
    return {
        "matmul": lambda: linalg.matmul(a, b),
        "cholesky": lambda: linalg.cholesky(r_n),
        "eigvalsh": lambda: linalg.hermitian_eigenvalues(r_s),
        "whiten": lambda: linalg.whiten_eigenvalues(r_s, r_n),
    }


def _best(fn, repeat):
    number = max(1, int(0.05 / max(timeit.timeit(fn, number=1), 1e-7)))
    return min(timeit.repeat(fn, number=number, repeat=repeat)) / number


def main(argv=None):
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--sizes", default="4,8,16,32,64,128")
    p.add_argument("--repeat", type=int, default=5)
    args = p.parse_args(argv)
    backends = linalg.available_backends()
    if "compiled" not in backends:
        print("compiled extension not built; only the python backend is available")
    rng = np.random.default_rng(0)
    print(f"{'kernel':<10}{'n':>5}" + "".join(f"{b + ' (us)':>16}" for b in backends) + f"{'ratio':>9}")
    for n in (int(s) for s in args.sizes.split(",")):
        cases = _inputs(n, rng)
        for name, fn in cases.items():
            times = {}
            for b in backends:
                prev = linalg.set_backend(b)
                try:
                    times[b] = _best(fn, args.repeat)
                finally:
                    linalg.set_backend(prev)
            ratio = times["python"] / times["compiled"] if "compiled" in times else float("nan")
            print(f"{name:<10}{n:>5}" + "".join(f"{times[b] * 1e6:>16.1f}" for b in backends) + f"{ratio:>9.2f}")


if __name__ == "__main__":
    main()
