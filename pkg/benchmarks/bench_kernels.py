"""Time the numba loss/gradient kernels against the numpy fallback.

    python benchmarks/bench_kernels.py --n 200000 --d 10 --k 2

Both backends are run on the same inputs; results are checked to agree
before timings are reported.
"""
import argparse
import time

import numpy as np

from dare import _kernels


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n", type=int, default=200_000)
    ap.add_argument("--d", type=int, default=10)
    ap.add_argument("--k", type=int, default=2)
    ap.add_argument("--repeat", type=int, default=7)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    if not _kernels.HAVE_NUMBA:
        print("numba unavailable (or DARE_DISABLE_NUMBA set); only the numpy path can run")
        return

    rng = np.random.default_rng(args.seed)
    Z = rng.standard_normal((args.n, args.d))
    w = np.full(args.n, 1.0 / args.n)
    yc = rng.integers(0, args.k, args.n)
    yr = rng.standard_normal(args.n)
    beta_c = rng.standard_normal((args.d, args.k))
    bias_c = rng.standard_normal(args.k)
    beta_r = rng.standard_normal((args.d, 1))
    bias_r = rng.standard_normal(1)

    cases = {
        "softmax_xent": (_kernels.softmax_xent, (Z, yc, beta_c, bias_c, w)),
        "squared": (_kernels.squared, (Z, yr, beta_r, bias_r, w)),
    }
    print(f"n={args.n} d={args.d} k={args.k} best of {args.repeat}")
    print(f"{'kernel':<14}{'numpy [ms]':>12}{'numba [ms]':>12}{'speedup':>10}{'max diff':>12}")
    for name, (fn, a) in cases.items():
        fn(*a, use_numba=True)  # compile / load cache
        ref = fn(*a, use_numba=False)
        got = fn(*a, use_numba=True)
        diff = max(abs(ref[0] - got[0]), np.abs(ref[1] - got[1]).max(), np.abs(ref[2] - got[2]).max())
        t_np = best_of(lambda: fn(*a, use_numba=False), args.repeat)
        t_nb = best_of(lambda: fn(*a, use_numba=True), args.repeat)
        print(f"{name:<14}{1e3 * t_np:>12.2f}{1e3 * t_nb:>12.2f}{t_np / t_nb:>10.2f}{diff:>12.2e}")


if __name__ == "__main__":
    main()
