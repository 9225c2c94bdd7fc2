"""Compare the compiled and pure-Python change-point kernels.

    python benchmarks/bench_cpd.py [--sizes 250,500,1000,2000] [--repeat 3]

Both kernels are fed the same prefix-sum tables, so the timings isolate the
dynamic programme; the breakpoints are checked for equality as a side effect.
"""
import argparse
import time

import numpy as np

from hazardscope import _cpd_py
from hazardscope.changepoint import KernelCost, default_penalty, tie_tolerance

try:
    from hazardscope import _cpd_core
except ImportError:
    _cpd_core = None


def _signal(n, rng):
    cuts = np.sort(rng.choice(np.arange(n // 10, n - n // 10), size=4, replace=False))
    levels = rng.random(5)
    x = np.repeat(levels, np.diff(np.concatenate([[0], cuts, [n]])))
    return x + rng.normal(0, 0.05, n)


def _best_of(fn, repeat):
    best, out = float("inf"), None
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t0)
    return best, out


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.split("\n")[0])
    ap.add_argument("--sizes", default="250,500,1000,2000")
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--k", type=int, default=4)
    args = ap.parse_args(argv)
    if _cpd_core is None:
        print("compiled extension not built; only the fallback is timed")
    rng = np.random.default_rng(0)
    print(f"{'N':>6} {'mode':>10} {'python s':>10} {'compiled s':>11} {'speedup':>8} {'same':>5}")
    for n in (int(s) for s in args.sizes.split(",")):
        x = _signal(n, rng)
        kc = KernelCost(x)
        tol = tie_tolerance(n)
        beta = default_penalty(x)
        cases = {
            "fixed_k": lambda impl: impl.fixed_k(kc.S, kc.D, args.k, 2, tol),
            "penalized": lambda impl: impl.penalized(kc.S, kc.D, beta, 2, tol),
        }
        for mode, run in cases.items():
            t_py, (bp_py, _) = _best_of(lambda: run(_cpd_py), args.repeat)
            if _cpd_core is None:
                print(f"{n:>6} {mode:>10} {t_py:>10.4f} {'-':>11} {'-':>8} {'-':>5}")
                continue
            t_c, (bp_c, _) = _best_of(lambda: run(_cpd_core), args.repeat)
            same = list(bp_py) == list(bp_c)
            print(f"{n:>6} {mode:>10} {t_py:>10.4f} {t_c:>11.4f} {t_py / t_c:>7.1f}x {str(same):>5}")


if __name__ == "__main__":
    main()
