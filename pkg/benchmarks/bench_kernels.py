"""Compiled kernels against the numpy fallback.

    python benchmarks/bench_kernels.py [--repeat N]

Times the three hot kernels directly, then one end-to-end cost solve and
one simulation under each backend (in fresh interpreters, since the backend
is fixed at import).
"""
import argparse
import os
import subprocess
import sys
import timeit

import numpy as np

from hpsim import _pykernels, cost, maps

try:
    from hpsim import _kernels
except ImportError:
    _kernels = None


def _schur(k, case):
    *args, m = case
    k.schur_block(*args, np.zeros((m, m)))


def _cases(rng):
    a = rng.normal(size=(36, 36))
    sym = a + a.T
    # Schur assembly on the constraint blocks the cost programs actually build
    schur = {}
    for d in (3, 6):
        bc = cost.tc_program(maps.random_hp_map(d, d, rng))[0].build().coeffs[0]
        n = 2 * d * d
        g = rng.normal(size=(n, n))
        X = g @ g.T + np.eye(n)
        schur[d] = (bc.indptr, bc.rows, bc.cols, bc.vals, X, np.linalg.inv(X), len(bc.indptr) - 1)
    u = rng.random((65536, 3))
    cdf1 = np.append(np.cumsum(np.full(3, 0.25)), np.inf)
    cdf2 = np.tile([0.5, np.inf], (4, 1))
    cdf3 = np.full((4, 2, 2), np.inf)
    cdf3[:, :, 0] = 0.3
    n2 = np.full(4, 2, dtype=np.int64)
    n3 = np.full((4, 2), 2, dtype=np.int64)
    return {
        "jacobi_eigh 36x36": lambda k: k.jacobi_eigh(sym),
        "schur_block qutrit": lambda k: _schur(k, schur[3]),
        "schur_block d=6": lambda k: _schur(k, schur[6]),
        "sample_tree 65536 shots": lambda k: k.sample_tree(u, cdf1, cdf2, cdf3, n2, n3),
    }


END_TO_END = ("import time, numpy as np; from hpsim import maps, cost, simulate, decompose;"
              "rng = np.random.default_rng(0); e = maps.random_hp_map(3, 3, rng);"
              "t0 = time.perf_counter(); cost.gamma_tc(e); t1 = time.perf_counter();"
              "t = decompose.hp_to_twisted(e);"
              "t2 = time.perf_counter(); simulate.run_mcpp(t, np.eye(3) / 3, np.diag([1., 0, -1]), 10**6);"
              "print(t1 - t0, time.perf_counter() - t2)")


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()
    cases = _cases(np.random.default_rng(1))
    print(f"{'kernel':28s} {'python ms':>10s} {'cython ms':>10s} {'speedup':>8s}")
    for name, fn in cases.items():
        tp = min(timeit.repeat(lambda: fn(_pykernels), number=1, repeat=args.repeat)) * 1e3
        if _kernels is None:
            print(f"{name:28s} {tp:10.2f} {'n/a':>10s}")
            continue
        tc = min(timeit.repeat(lambda: fn(_kernels), number=1, repeat=args.repeat)) * 1e3
        print(f"{name:28s} {tp:10.2f} {tc:10.2f} {tp / tc:8.1f}")
    print()
    print(f"{'end to end':28s} {'gamma_tc s':>10s} {'1e6 shots s':>12s}")
    for backend in ("python", "cython"):
        env = dict(os.environ, HPSIM_BACKEND=backend)
        out = subprocess.run([sys.executable, "-c", END_TO_END], env=env, capture_output=True,
                             text=True, check=True).stdout.split()
        print(f"{backend:28s} {float(out[0]):10.3f} {float(out[1]):12.3f}")


if __name__ == "__main__":
    main()
