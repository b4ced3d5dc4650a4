"""Compare the compiled and numpy angular-integral kernels.

    python benchmarks/bench_kernels.py [--n-samples N] [--repeat R]
"""
import argparse
import timeit

import numpy as np

from gaussarea import _kernels_py, kernels


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n-samples", type=int, default=200_000)
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()

    rng = np.random.default_rng(0)
    k1 = rng.normal(scale=3.0, size=args.n_samples)
    k2 = rng.normal(scale=3.0, size=args.n_samples)
    backends = {"numpy": _kernels_py}
    if kernels.BACKEND == "cython":
        from gaussarea import _ckernels

        backends["cython"] = _ckernels
    else:
        print("compiled kernels not built; timing numpy only")

    print(f"{'mode':<10}{'nodes':>7}{'backend':>9}{'best [ms]':>12}{'max |diff|':>13}")
    for mode, n in (("split", 64), ("split", 512), ("trapezoid", 512)):
        ref = kernels.theta_integral(k1, k2, n, mode, impl=_kernels_py)
        for name, impl in backends.items():
            t = min(timeit.repeat(lambda: kernels.theta_integral(k1, k2, n, mode, impl=impl),
                                  number=1, repeat=args.repeat))
            diff = np.max(np.abs(kernels.theta_integral(k1, k2, n, mode, impl=impl) - ref))
            print(f"{mode:<10}{n:>7}{name:>9}{1e3 * t:>12.2f}{diff:>13.2e}")


if __name__ == "__main__":
    main()
