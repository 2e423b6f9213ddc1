"""Timing comparison of the compiled and pure-numpy kernel backends.

Usage:

    python3 benchmarks/bench_backends.py [--batch 2000] [--width 64]
                                         [--repeats 20]

Times the three hot kernels (forward pass, forward pass with divergence,
training loss with gradients) for a few problem sizes and prints a
markdown table of per-call milliseconds plus the speedup factor.  The
compiled column is skipped when numba is not importable.
"""

import argparse
import time

import numpy as np

from lfis.backends import numpy_kernels
from lfis.nn import init_params

try:
    from lfis.backends import numba_kernels
except ImportError:  # pragma: no cover - numba is optional
    numba_kernels = None


def _args(dim, width, batch, rng):
    p = init_params(dim, width, rng)
    # nonzero output layer so the kernels do representative work
    W3 = rng.standard_normal(p.W3.shape) * 0.05
    b3 = rng.standard_normal(p.b3.shape) * 0.05
    X = rng.standard_normal((batch, dim))
    S = rng.standard_normal((batch, dim))
    C = rng.standard_normal(batch)
    return (p.W1, p.b1, p.W2, p.b2, W3, b3), X, S, C


def _time(fn, repeats):
    fn()  # warm-up (and JIT compile for the numba backend)
    t0 = time.perf_counter()
    for _ in range(repeats):
        fn()
    return (time.perf_counter() - t0) / repeats * 1e3  # ms per call


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--batch", type=int, default=2000)
    ap.add_argument("--width", type=int, default=64)
    ap.add_argument("--repeats", type=int, default=20)
    opts = ap.parse_args()

    rng = np.random.default_rng(0)
    kernels = ("forward", "forward_div", "loss_and_grad")
    print(f"batch={opts.batch} width={opts.width} repeats={opts.repeats}")
    print()
    header = "| dim | kernel | numpy ms | numba ms | speedup |"
    print(header)
    print("|---:|:---|---:|---:|---:|")
    for dim in (2, 10, 100):
        weights, X, S, C = _args(dim, opts.width, opts.batch, rng)
        calls = {
            "forward": lambda m: m.forward(*weights, X),
            "forward_div": lambda m: m.forward_div(*weights, X),
            "loss_and_grad": lambda m: m.loss_and_grad(*weights, X, S, C),
        }
        for name in kernels:
            t_np = _time(lambda: calls[name](numpy_kernels), opts.repeats)
            if numba_kernels is None:
                print(f"| {dim} | {name} | {t_np:.3f} | n/a | n/a |")
                continue
            t_nb = _time(lambda: calls[name](numba_kernels), opts.repeats)
            print(f"| {dim} | {name} | {t_np:.3f} | {t_nb:.3f} "
                  f"| {t_np / t_nb:.2f}x |")


if __name__ == "__main__":
    main()
