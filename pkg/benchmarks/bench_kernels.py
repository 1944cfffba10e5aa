"""Time the compiled kernels against the pure-Python fallback.

Run from the repository root::

    python3 benchmarks/bench_kernels.py [--repeat 5]
"""
import argparse
import timeit

import numpy as np

from groupvoice import kernels, psycho


def cases(rng):
    zt = rng.standard_normal((220_500, 3))
    w = np.array([0.6, 0.0, 0.8])
    core = psycho.core_loudness(rng.uniform(20, 90, 28))
    zc = np.cumsum(441 * (1 + 0.01 * rng.standard_normal(5000)))
    per = np.full(len(zc), 441.0)
    vals = 0.005 * (1 + 0.01 * rng.standard_normal(20_000))
    runs = np.repeat(np.arange(20), 1000).astype(np.int64)
    return {
        "fixed_point_terms (5 s x 3ch)": lambda k: k.fixed_point_terms(w, zt, kernels.LOGCOSH),
        "spread_specific_loudness": lambda k: k.spread_specific_loudness(core, psycho._ZUP, psycho._RNS,
                                                                         psycho._USL),
        "track_cycle_boundaries (5000)": lambda k: k.track_cycle_boundaries(zc, per),
        "successive_abs_diff (20000)": lambda k: k.successive_abs_diff(vals, runs),
        "pq_deviation K=5 (20000)": lambda k: k.pq_deviation(vals, runs, 5),
    }


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()
    backends = kernels.backends()
    names = list(backends)
    print(f"{'kernel':34s}" + "".join(f"{n:>12s}" for n in names) + ("   speedup" if len(names) > 1 else ""))
    for label, fn in cases(np.random.default_rng(0)).items():
        best = {}
        for n in names:
            mod = backends[n]
            number = max(1, int(0.2 / max(timeit.timeit(lambda: fn(mod), number=1), 1e-6)))
            best[n] = min(timeit.repeat(lambda: fn(mod), number=number, repeat=args.repeat)) / number
        row = f"{label:34s}" + "".join(f"{best[n] * 1e3:10.3f}ms" for n in names)
        if "cython" in best:
            row += f"{best['python'] / best['cython']:9.1f}x"
        print(row)


if __name__ == "__main__":
    main()
