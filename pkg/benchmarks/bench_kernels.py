"""Time the numba kernels against the pure-numpy fallback.

    python benchmarks/bench_kernels.py [--cells 20000] [--repeat 5]
"""
from __future__ import annotations

import argparse
import time

import numpy as np

from gaugesmooth import _kernels


def _best(fn, repeat):
    fn()  # warm-up (and JIT compile)
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def cases(cells, rng):
    a = rng.standard_normal((cells, 4, 4))
    b = rng.standard_normal((cells, 4, 4))
    small = 0.05 * a
    loops = rng.integers(0, cells, size=(cells, 4))
    out = np.zeros_like(a)
    parent = np.concatenate([[0], rng.integers(0, np.arange(1, cells))])
    order = np.arange(cells)
    gens = np.eye(4) + 0.01 * b
    return {
        "matmul_acc": lambda impl: impl.matmul_acc(out, a, b, 1.0),
        "frobenius": lambda impl: impl.frobenius(a),
        "expm": lambda impl: impl.expm(a),
        "tree_transport": lambda impl: impl.tree_transport(order, parent, gens, np.eye(4)),
        "loop_products": lambda impl: impl.loop_products(gens, loops),
        "log_near_identity": lambda impl: impl.log_near_identity(np.eye(4) + small, 12),
    }


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--cells", type=int, default=20000)
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args(argv)
    if _kernels.numba_impl is None:
        raise SystemExit("numba is not importable; nothing to compare")
    rng = np.random.default_rng(0)
    print(f"{'kernel':<20}{'numpy [ms]':>12}{'numba [ms]':>12}{'speedup':>10}")
    for name, run in cases(args.cells, rng).items():
        t_np = _best(lambda: run(_kernels.numpy_impl), args.repeat)
        t_nb = _best(lambda: run(_kernels.numba_impl), args.repeat)
        print(f"{name:<20}{1e3 * t_np:>12.2f}{1e3 * t_nb:>12.2f}{t_np / t_nb:>10.1f}")


if __name__ == "__main__":
    main()
