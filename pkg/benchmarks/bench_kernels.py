"""Time the numba kernels against the numpy fallback.

    python3 benchmarks/bench_kernels.py [--repeat N] [--scale F]

Each kernel runs on inputs shaped like a real workload (a 512-point
lattice scan, a 10^6-pair tag stream). Results of both backends are
compared before timing so a silent mismatch cannot pass as a speedup.
"""

import argparse
import time

import numpy as np

from franson.kernels import _numpy as npk

try:
    from franson.kernels import _numba as nbk
except ImportError:
    nbk = None


def workloads(scale, rng):
    n = int(1023 * scale)
    x = 1.19e15 + np.linspace(-3e12, 3e12, n)
    h = rng.random(n)
    taus = np.linspace(-3e-12, 3e-12, int(4000 * scale))

    pairs = int(1_000_000 * scale)
    epoch = np.arange(pairs, dtype=np.int64) * 100_000 + 50_000
    t1 = np.sort(epoch + rng.integers(-400, 400, pairs))
    t2 = np.sort(epoch + rng.integers(-400, 400, pairs))

    w = rng.normal(0.0, 1.0, (2, pairs))
    return {
        "cos_sums": (x, h, taus),
        "window_histogram": (t1, t2, 1000, 10),
        "pair_nearest": (t1, t2, 1000),
        "bin2d": (w[0], w[1], -4.0, 8.0 / 64, 64, -4.0, 8.0 / 64, 64),
    }


def same(a, b):
    if isinstance(a, tuple):
        return all(same(x, y) for x, y in zip(a, b))
    if isinstance(a, np.ndarray) and a.dtype.kind == "f":
        return np.allclose(a, b, rtol=1e-12, atol=1e-9 * np.abs(a).max())
    return np.array_equal(a, b)


def best_of(fn, args, repeat):
    times = []
    for _ in range(repeat):
        t = time.perf_counter()
        fn(*args)
        times.append(time.perf_counter() - t)
    return min(times)


def main(argv=None):
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--repeat", type=int, default=3)
    p.add_argument("--scale", type=float, default=1.0, help="multiply workload sizes")
    args = p.parse_args(argv)
    rng = np.random.default_rng(7)
    print(f"{'kernel':<18}{'numpy [s]':>12}{'numba [s]':>12}{'speedup':>10}")
    for name, inputs in workloads(args.scale, rng).items():
        f_np = getattr(npk, name)
        t_np = best_of(f_np, inputs, args.repeat)
        if nbk is None:
            print(f"{name:<18}{t_np:>12.4f}{'n/a':>12}{'':>10}")
            continue
        f_nb = getattr(nbk, name)
        f_nb(*inputs)  # compile outside the timed runs
        if not same(f_np(*inputs), f_nb(*inputs)):
            raise SystemExit(f"{name}: backends disagree")
        t_nb = best_of(f_nb, inputs, args.repeat)
        print(f"{name:<18}{t_np:>12.4f}{t_nb:>12.4f}{t_np / t_nb:>9.1f}x")


if __name__ == "__main__":
    main()
