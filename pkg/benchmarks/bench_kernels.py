"""Compiled versus numpy kernel timings.

    python benchmarks/bench_kernels.py [--sizes 256 1024 2048] [--repeat 3]

Every kernel is run on both backends with identical inputs; outputs are
checked for equality before the timings are reported.
"""
import argparse
import sys
import timeit

import numpy as np

from topgeo import kernels


def cases(n, rng):
    pts = rng.normal(size=(n, 3))
    centroid = pts.mean(axis=0)
    other = rng.normal(size=(n, 3))
    m = min(n, 256)
    cost = np.sqrt(((pts[:m, None] - other[None, :m]) ** 2).sum(-1))
    no_excl = np.full(n, -1, dtype=np.int64)
    return {
        "fps": lambda k: k.fps(pts, n // 4, centroid),
        "knn(k=16)": lambda k: k.knn(pts, pts, 16, np.arange(n, dtype=np.int64)),
        "nearest": lambda k: k.nearest(pts, other),
        f"knn(k=16, q={n // 4})": lambda k: k.knn(pts[: n // 4], pts, 16, no_excl[: n // 4]),
        f"hungarian({m})": lambda k: k.hungarian(cost),
        f"auction({m})": lambda k: k.auction(cost, 0.1 * cost.max(), 1e-4 * cost.max()),
    }


def same(a, b):
    if isinstance(a, tuple):
        return all(np.array_equal(x, y) for x, y in zip(a, b))
    return np.array_equal(a, b)


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--sizes", type=int, nargs="+", default=[256, 1024, 2048])
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args(argv)
    if "cython" not in kernels.BACKENDS:
        print("compiled extension not built; nothing to compare", file=sys.stderr)
        return 1
    py, cy = kernels.BACKENDS["python"], kernels.BACKENDS["cython"]
    rng = np.random.default_rng(0)
    print(f"{'kernel':<24s}{'n':>6s}{'python ms':>12s}{'cython ms':>12s}{'speedup':>10s}  agree")
    for n in args.sizes:
        for name, fn in cases(n, rng).items():
            agree = same(fn(py), fn(cy))
            t_py = min(timeit.repeat(lambda: fn(py), number=1, repeat=args.repeat)) * 1e3
            t_cy = min(timeit.repeat(lambda: fn(cy), number=1, repeat=args.repeat)) * 1e3
            print(f"{name:<24s}{n:>6d}{t_py:>12.2f}{t_cy:>12.2f}{t_py / t_cy:>9.1f}x  {agree}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
