#!/usr/bin/env python3
"""Time the recurrent sequence kernels on both builds.

Runs the forward and backward kernels at rollout-like and training-like
shapes, once with the numba build and once with the pure-numpy twin, and
prints the per-call times side by side. Run from the repo root:

    python3 benchmarks/bench_kernels.py [--hidden 48] [--steps 30] [--repeat 200]
"""

import argparse
import importlib
import os
import statistics
import sys
import time

import numpy as np


def load_kernels(use_numba: bool):
    os.environ["XTOM_NUMBA"] = "1" if use_numba else "0"
    import xtom.policy.kernels as kernels

    return importlib.reload(kernels)


def bench(fn, args, repeat: int) -> float:
    fn(*args)  # warm up (and JIT-compile on the numba build)
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn(*args)
        times.append(time.perf_counter() - t0)
    return statistics.median(times)


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--hidden", type=int, default=48)
    parser.add_argument("--input-dim", type=int, default=76)
    parser.add_argument("--steps", type=int, default=30)
    parser.add_argument("--repeat", type=int, default=200)
    args = parser.parse_args()

    rng = np.random.default_rng(0)
    D, H, T = args.input_dim, args.hidden, args.steps
    x = rng.integers(0, 2, size=(T, D)).astype(np.float64)
    wx = rng.normal(0, 0.1, size=(4 * H, D))
    wh = rng.normal(0, 0.1, size=(4 * H, H))
    b = np.zeros(4 * H)
    h0 = np.zeros(H)
    dh = rng.normal(size=(T, H))

    rows = {}
    for use_numba in (False, True):
        try:
            kernels = load_kernels(use_numba)
        except ImportError:
            print("numba unavailable; skipping that build")
            continue
        name = kernels.backend_name()
        fwd = bench(kernels.lstm_forward, (x, wx, wh, b, h0, h0), args.repeat)
        caches = kernels.lstm_forward(x, wx, wh, b, h0, h0)
        bwd = bench(
            kernels.lstm_backward,
            (x, *caches, wx, wh, h0, h0, dh),
            args.repeat,
        )
        stp = bench(kernels.lstm_step, (x[0], wx, wh, b, h0, h0), args.repeat)
        rows[name] = (fwd, bwd, stp)

    print(f"\nshapes: T={T} D={D} H={H}  (median of {args.repeat})")
    print(f"{'build':<8} {'forward':>12} {'backward':>12} {'step':>12}")
    for name, (fwd, bwd, stp) in rows.items():
        print(f"{name:<8} {fwd * 1e6:>10.1f}us {bwd * 1e6:>10.1f}us {stp * 1e6:>10.1f}us")
    if len(rows) == 2:
        f_np, b_np, s_np = rows["numpy"]
        f_nb, b_nb, s_nb = rows["numba"]
        print(
            f"{'speedup':<8} {f_np / f_nb:>11.1f}x {b_np / b_nb:>11.1f}x {s_np / s_nb:>11.1f}x"
        )
    return 0


if __name__ == "__main__":
    sys.exit(main())
