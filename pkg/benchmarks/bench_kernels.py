"""Benchmark the numba kernels against the pure-numpy fallback.

Usage:
    python benchmarks/bench_kernels.py [--repeats 200]

Runs each kernel on representative workloads and prints the per-call time
for both paths plus the speedup. The numba path is warmed up first so
compilation time is excluded.
"""

import argparse
import time

import numpy as np

from pefkit._kernels import (
    USING_NUMBA,
    _entropy_bits_np,
    _greedy_fill_np,
    _joint_entropy_bits_np,
    entropy_bits,
    greedy_fill,
    joint_entropy_bits,
)


def timeit(fn, args_list, repeats):
    best = float("inf")
    for _ in range(repeats):
        start = time.perf_counter()
        for args in args_list:
            fn(*args)
        best = min(best, time.perf_counter() - start)
    return best / len(args_list)


def main():
    parser = argparse.ArgumentParser()
    parser.add_argument("--repeats", type=int, default=200)
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args()

    if not USING_NUMBA:
        print(
            "numba path is disabled (PEFKIT_DISABLE_NUMBA set or numba missing); "
            "both columns below will use the numpy fallback"
        )

    rng = np.random.default_rng(args.seed)
    entropy_inputs = [(rng.dirichlet(np.ones(100)),) for _ in range(50)]
    joint_inputs = [(rng.dirichlet(np.ones(64)).reshape(8, 8),) for _ in range(50)]
    greedy_inputs = [
        (rng.dirichlet(np.ones(50)), rng.dirichlet(np.ones(50))) for _ in range(50)
    ]

    cases = [
        ("entropy_bits (k=100)", entropy_bits, _entropy_bits_np, entropy_inputs),
        (
            "joint_entropy_bits (8x8)",
            joint_entropy_bits,
            _joint_entropy_bits_np,
            joint_inputs,
        ),
        ("greedy_fill (50x50)", greedy_fill, _greedy_fill_np, greedy_inputs),
    ]

    # warm-up: trigger jit compilation outside the timed region
    for _, fast, _slow, inputs in cases:
        fast(*inputs[0])

    print(f"{'kernel':<26} {'numba':>12} {'numpy':>12} {'speedup':>9}")
    for name, fast, slow, inputs in cases:
        t_fast = timeit(fast, inputs, args.repeats)
        t_slow = timeit(slow, inputs, args.repeats)
        print(
            f"{name:<26} {t_fast * 1e6:>10.2f}us {t_slow * 1e6:>10.2f}us "
            f"{t_slow / t_fast:>8.1f}x"
        )


if __name__ == "__main__":
    main()
