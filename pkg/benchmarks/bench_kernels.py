"""Time the numba kernels against the pure-numpy fallbacks.

    python3 benchmarks/bench_kernels.py [--sizes 10000,50000] [--repeat 3]

Each kernel is run once on a small input first so JIT compilation is not
counted, then the best of ``--repeat`` runs is reported. Outputs of the two
backends are compared on every input.
"""

import argparse
import time

import numpy as np

from flowbench.kernels import _numba, _numpy


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        times.append(time.perf_counter() - t0)
    return min(times), out


def cases(n, rng):
    u = np.sort(rng.lognormal(3, 2, n))
    v = np.sort(rng.lognormal(3.2, 1.5, n + n // 3))
    g = rng.integers(0, n // 20 + 1, n)
    c = rng.integers(0, 500, n)
    m = min(n, 5000)  # brute-force kNN is quadratic
    X = rng.normal(size=(m, 9))
    return [
        ("wasserstein_sorted", f"n={n}", lambda k: k.wasserstein_sorted(u, v)),
        ("distinct_pair_counts", f"n={n}", lambda k: k.distinct_pair_counts(g, c, int(g.max()) + 1, 500)),
        ("knn", f"n={m},d=9,k=10", lambda k: k.knn(X, 10)),
    ]


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--sizes", default="10000,50000,250000")
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args(argv)

    rng = np.random.default_rng(args.seed)
    for _, _, fn in cases(200, rng):
        fn(_numba)  # compile

    print(f"{'kernel':<22} {'input':<18} {'numpy s':>9} {'numba s':>9} {'speedup':>8}")
    for n in (int(s) for s in args.sizes.split(",")):
        for name, label, fn in cases(n, rng):
            t_np, out_np = best_of(lambda: fn(_numpy), args.repeat)
            t_nb, out_nb = best_of(lambda: fn(_numba), args.repeat)
            assert np.allclose(out_np, out_nb, rtol=1e-12, atol=0), name
            print(f"{name:<22} {label:<18} {t_np:9.4f} {t_nb:9.4f} {t_np / t_nb:7.1f}x")


if __name__ == "__main__":
    main()
