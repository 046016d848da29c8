"""Time the compiled kernels against the NumPy fallback.

    python benchmarks/bench_kernels.py [--repeat 20]

Prints one line per kernel and shape with the best-of-N time for each backend,
the speedup, and whether the outputs agree bit for bit.
"""
import argparse
import timeit

import numpy as np

from byzcsl import _kernels_py as py

try:
    from byzcsl import _ckernels as cy
except ImportError:  # pragma: no cover
    cy = None

SHAPES = [(20, 500), (50, 500), (200, 500), (50, 5000)]


def cases(rng):
    for m, d in SHAPES:
        G = rng.standard_normal((m, d))
        b = int(np.floor(0.2 * m))
        yield f"trimmed_mean m={m} d={d}", lambda k, G=G, b=b: k.trimmed_mean(G, b)
        yield f"median m={m} d={d}", lambda k, G=G, m=m: k.order_statistic(G, (m + 1) // 2)
    r = rng.standard_normal(10_000)
    yield "pseudo_huber_deriv n=10000", lambda k: k.pseudo_huber_deriv(0.743, r)
    yield "smoothed_quantile_value n=10000", lambda k: k.smoothed_quantile_value(0.3, 0.25, r)


def best(fn, repeat):
    return min(timeit.repeat(fn, number=1, repeat=repeat))


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--repeat", type=int, default=20)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args(argv)
    if cy is None:
        print("compiled backend not built; nothing to compare")
        return 1
    rng = np.random.default_rng(args.seed)
    print(f"{'kernel':36s} {'python ms':>10s} {'cython ms':>10s} {'speedup':>8s}  equal")
    for name, call in cases(rng):
        tp = best(lambda: call(py), args.repeat)
        tc = best(lambda: call(cy), args.repeat)
        same = np.array_equal(np.asarray(call(py)), np.asarray(call(cy)))
        print(f"{name:36s} {1e3 * tp:10.3f} {1e3 * tc:10.3f} {tp / tc:8.2f}  {same}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
