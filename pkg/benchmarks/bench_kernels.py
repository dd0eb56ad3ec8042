"""Compiled vs numpy kernels: wall time and agreement.

    python3 benchmarks/bench_kernels.py [--repeat 5] [--quick]
"""

import argparse
import time

import numpy as np

from gibbsfrag import kernels, special
from gibbsfrag.eppf import GibbsWeights


def best_of(fn, repeat):
    times = []
    out = None
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        times.append(time.perf_counter() - t0)
    return min(times), out


def cases(quick):
    scale = 10 if quick else 1
    x, w = special.gauss_legendre(64)
    s = np.geomspace(1.0, 40.0, 200_000 // scale)
    rng = np.random.default_rng(0)
    n, size = 12, 200_000 // scale
    V = GibbsWeights.pd(0.6, 0.3, n).vtable(n)
    unif = rng.random((size, n))
    groups = np.zeros(n, dtype=np.int64)
    nested = np.repeat(np.arange(4), 3)[None, :].repeat(size, axis=0)
    Vf = GibbsWeights.pd(0.6, -0.3, n).vtable(n)
    return [
        ("ml_pdf_zolo", len(s), lambda b: kernels.ml_pdf_zolo(0.6, s, x, w, backend=b)),
        ("ml_sf_zolo", len(s), lambda b: kernels.ml_sf_zolo(0.6, s, x, w, backend=b)),
        ("gibbs_sample", size, lambda b: kernels.gibbs_sample(V, 0.6, 0, groups, unif, backend=b)),
        ("gibbs_sample/groups", size,
         lambda b: kernels.gibbs_sample(Vf, 0.6, 0, nested, unif, backend=b)),
    ]


def main():
    ap = argparse.ArgumentParser(allow_abbrev=False)
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--quick", action="store_true")
    args = ap.parse_args()
    try:
        kernels.backend_module("cython")
        have_cython = True
    except ImportError:
        have_cython = False
    print(f"active backend: {kernels.BACKEND}")
    print(f"{'kernel':22s} {'items':>8s} {'numpy s':>10s} {'cython s':>10s} {'speedup':>8s}  max diff")
    for name, items, fn in cases(args.quick):
        t_np, out_np = best_of(lambda: fn("numpy"), args.repeat)
        if have_cython:
            t_cy, out_cy = best_of(lambda: fn("cython"), args.repeat)
            diff = float(np.max(np.abs(np.asarray(out_np, float) - np.asarray(out_cy, float))))
            print(f"{name:22s} {items:8d} {t_np:10.4f} {t_cy:10.4f} {t_np / t_cy:8.1f}  {diff:.2e}")
        else:
            print(f"{name:22s} {items:8d} {t_np:10.4f} {'-':>10s} {'-':>8s}  -")


if __name__ == "__main__":
    main()
