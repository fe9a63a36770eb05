"""Time the numba and pure-numpy kernels side by side.

    python3 benchmarks/bench_kernels.py [--sizes 10 20 30] [--points 100000] [--repeat 5]

Prints one line per kernel/size with the best-of-N wall time of each path
and the max absolute difference between them.
"""

import argparse
import time

import numpy as np

from arrayqed import _kernels
from arrayqed.effective_model import params_from_spec
from arrayqed.geometry import LatticeSpec, build_lattice
from arrayqed.greens import K0


def best_time(fn, repeat):
    fn()  # warm-up (jit compile, caches)
    best = float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--sizes", type=int, nargs="+", default=[10, 20, 30])
    ap.add_argument("--points", type=int, default=100_000)
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args(argv)

    if not _kernels.HAVE_NUMBA:
        print("numba unavailable (or disabled via ARRAYQED_DISABLE_NUMBA); numpy path only")

    for n in args.sizes:
        spec = LatticeSpec(nx=n, ny=n)
        geom = build_lattice(spec)
        pos, d = geom.positions, geom.polarization
        t_np = best_time(lambda: _kernels.coupling_matrix_numpy(pos, d, K0), args.repeat)
        line = f"coupling_matrix  N={pos.shape[0]:5d}  numpy {t_np * 1e3:9.3f} ms"
        if _kernels.HAVE_NUMBA:
            t_nb = best_time(lambda: _kernels.coupling_matrix_numba(pos, d, K0), args.repeat)
            diff = np.abs(_kernels.coupling_matrix_numpy(pos, d, K0)
                          - _kernels.coupling_matrix_numba(pos, d, K0)).max()
            line += f"  numba {t_nb * 1e3:9.3f} ms  speedup {t_np / t_nb:6.2f}x  maxdiff {diff:.2e}"
        print(line)

    p = params_from_spec(LatticeSpec())
    h = p.generator()
    rng = np.random.default_rng(0)
    delta = rng.uniform(-5, 5, args.points) * p.g
    t = rng.uniform(0, 200, args.points) / p.g
    t_np = best_time(lambda: _kernels.two_level_response_numpy(*h, delta, t), args.repeat)
    line = f"two_level_resp   M={args.points:7d}  numpy {t_np * 1e3:9.3f} ms"
    if _kernels.HAVE_NUMBA:
        t_nb = best_time(lambda: _kernels.two_level_response_numba(*h, delta, t), args.repeat)
        a = _kernels.two_level_response_numpy(*h, delta, t)
        b = _kernels.two_level_response_numba(*h, delta, t)
        diff = max(np.abs(a[0] - b[0]).max(), np.abs(a[1] - b[1]).max() * p.g)
        line += f"  numba {t_nb * 1e3:9.3f} ms  speedup {t_np / t_nb:6.2f}x  maxdiff {diff:.2e}"
    print(line)


if __name__ == "__main__":
    main()
