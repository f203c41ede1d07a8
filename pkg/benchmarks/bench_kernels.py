"""Compare the compiled kernels with the NumPy fallback.

    python benchmarks/bench_kernels.py [--n 1000000] [--repeat 7]

Prints the best-of-``repeat`` time per call for each kernel and the speedup,
after checking that both backends return identical arrays.
"""
import argparse
import sys
import timeit

import numpy as np

from dirtymac import _pykernels

try:
    from dirtymac import _ckernels
except ImportError:
    _ckernels = None


def cases(n, seed=0):
    rng = np.random.default_rng(seed)
    y = rng.normal(0, 100, n)
    d1 = rng.uniform(-1, 1, n)
    d2 = rng.uniform(-1, 1, n)
    v = rng.uniform(-1, 1, n)
    return {
        "quantize": (y, 2.0),
        "mod": (y, 2.0),
        "encode": (v, y, d1, 0.8, 2.0),
        "decode": (y, d1, d2, 0.8, 1.0, 1.0, 2.0),
        "nearest_index": (y, 2.0, 16),
    }


def best(fn, args, repeat):
    fn(*args)  # warm-up
    return min(timeit.repeat(lambda: fn(*args), number=1, repeat=repeat))


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--n", type=int, default=10**6)
    parser.add_argument("--repeat", type=int, default=7)
    args = parser.parse_args(argv)
    if _ckernels is None:
        print("compiled kernels not built; nothing to compare", file=sys.stderr)
        return 1
    print(f"n = {args.n}, best of {args.repeat}")
    print(f"{'kernel':<14}{'numpy ms':>10}{'cython ms':>11}{'speedup':>9}")
    for name, call_args in cases(args.n).items():
        py, c = getattr(_pykernels, name), getattr(_ckernels, name)
        if not np.array_equal(py(*call_args), c(*call_args)):
            print(f"{name}: backends disagree", file=sys.stderr)
            return 2
        t_py, t_c = best(py, call_args, args.repeat), best(c, call_args, args.repeat)
        print(f"{name:<14}{t_py * 1e3:>10.2f}{t_c * 1e3:>11.2f}{t_py / t_c:>8.1f}x")
    return 0


if __name__ == "__main__":
    sys.exit(main())
