"""Time the compiled tridiagonal kernels against the pure-Python fallback.

    python3 benchmarks/bench_kernels.py [--n 2001] [--levels 4] [--repeat 3]
"""

import argparse
import time

import numpy as np

from susy_fields import _kernels_py
from susy_fields._backend import BACKEND

try:
    from susy_fields import _kernels as _kernels_c
except ImportError:
    _kernels_c = None


def oscillator_matrix(n):
    x = np.linspace(-8.0, 8.0, n)
    h = x[1] - x[0]
    return 2.0 / h**2 + x**2 - 1.0, np.full(n - 1, -1.0 / h**2)


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        times.append(time.perf_counter() - t0)
    return min(times), out


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n", type=int, default=2001)
    ap.add_argument("--levels", type=int, default=4)
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args()

    d, e = oscillator_matrix(args.n)
    abstol = 4 * np.finfo(float).eps * float(np.max(np.abs(d)) + 2 * np.max(np.abs(e)))
    rhs = np.random.default_rng(0).standard_normal(args.n)
    backends = [("python", _kernels_py)]
    if _kernels_c is not None:
        backends.append(("cython", _kernels_c))
    else:
        print("compiled kernels not built; timing the fallback only")
    print(f"active backend: {BACKEND}; n = {args.n}, levels = {args.levels}")

    results = {}
    for name, mod in backends:
        t_bis, (vals, _) = best_of(lambda: mod.bisect_lowest(d, e, args.levels, abstol, 200), args.repeat)
        t_sol, sol = best_of(lambda: mod.solve_tridiagonal(e, d - vals[0] + 1.0, e, rhs), args.repeat)
        results[name] = (t_bis, t_sol, vals, sol)
        print(f"{name:7} bisection {t_bis * 1e3:9.2f} ms   tridiagonal solve {t_sol * 1e3:8.3f} ms   "
              f"levels {np.array2string(vals, precision=6)}")
    if len(results) == 2:
        py, cy = results["python"], results["cython"]
        print(f"speed-up: bisection x{py[0] / cy[0]:.1f}, solve x{py[1] / cy[1]:.1f}; "
              f"max level difference {np.max(np.abs(py[2] - cy[2])):.1e}, "
              f"max solution difference {np.max(np.abs(py[3] - cy[3])):.1e}")


if __name__ == "__main__":
    main()
