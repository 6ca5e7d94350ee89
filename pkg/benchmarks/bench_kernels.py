"""Compare the compiled and pure-Python kernel backends.

Usage: python benchmarks/bench_kernels.py [--repeat N]
"""
import argparse
import timeit

import numpy as np

from stagelab.numcore import _kernels_py as py

try:
    from stagelab.numcore import _kernels as cy
except ImportError:
    cy = None


def cases(rng):
    x = rng.standard_normal((8, 32, 32, 32)).astype(np.float32)
    cols = py.im2col(x, 3, 3, 1, 1)
    pooled, arg = py.maxpool_forward(x, 3, 2, 1)
    grad = np.ones_like(pooled)
    return {
        "im2col 3x3 8x32x32x32": lambda k: k.im2col(x, 3, 3, 1, 1),
        "col2im 3x3 8x32x32x32": lambda k: k.col2im(cols, 8, 32, 32, 32, 3, 3, 1, 1),
        "maxpool fwd 3/2": lambda k: k.maxpool_forward(x, 3, 2, 1),
        "maxpool bwd 3/2": lambda k: k.maxpool_backward(grad, arg, 32, 32),
    }


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()
    rng = np.random.default_rng(0)
    print(f"{'kernel':<24} {'python ms':>10} {'cython ms':>10} {'speedup':>8}")
    for name, fn in cases(rng).items():
        t_py = min(timeit.repeat(lambda: fn(py), number=1, repeat=args.repeat)) * 1e3
        if cy is None:
            print(f"{name:<24} {t_py:>10.2f} {'n/a':>10} {'n/a':>8}")
            continue
        t_cy = min(timeit.repeat(lambda: fn(cy), number=1, repeat=args.repeat)) * 1e3
        print(f"{name:<24} {t_py:>10.2f} {t_cy:>10.2f} {t_py / t_cy:>7.1f}x")


if __name__ == "__main__":
    main()
