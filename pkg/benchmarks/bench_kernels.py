"""Compare the numba kernels with the pure-numpy/Python fallbacks.

    python3 benchmarks/bench_kernels.py [--repeat 5]

Both backends are importable in one process: the fallbacks are kept under
their own names in ``probarc._kernels`` regardless of ``PROBARC_DISABLE_NUMBA``.
"""

from __future__ import annotations

import argparse
import time

import numpy as np

from probarc import _kernels as K
from probarc.generator import GenSpec, generate
from probarc.oracle import _dense
from probarc.pac import PackedCsp


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t)
    return min(times)


def propagation_case(n, m, p1, p2, seed, rounds):
    p = PackedCsp(generate(GenSpec(n, m, p1, p2, seed)))

    def call(fn):
        # eps below any reachable residual so every call runs the full budget
        return lambda: fn(0, p.arc_src, p.arc_dst, p.arc_rev, p.arc_mat, p.dst_start, p.unary,
                          p.initial_messages(), p.uniform(), 1e-300, rounds, 0, np.zeros(rounds))

    return call


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args(argv)
    print(f"numba available: {K.NUMBA_AVAILABLE}, active backend: {K.BACKEND}")
    print(f"{'kernel':<34}{'numba s':>12}{'fallback s':>12}{'speedup':>10}")

    for n, m, p1, p2 in ((12, 5, 1.0, 0.16), (20, 10, 1.0, 0.2), (40, 6, 0.3, 0.2)):
        call = propagation_case(n, m, p1, p2, seed=1, rounds=100)
        fast = call(K.propagate_kernel)
        status, rounds = fast()[:2]  # first call compiles
        assert status == K.MAX_ITER, "benchmark instance stopped early"
        t_fast = best_of(fast, args.repeat)
        t_slow = best_of(call(K.propagate_numpy), args.repeat)
        label = f"propagate n={n} m={m} p1={p1} x100"
        print(f"{label:<34}{t_fast:>12.5f}{t_slow:>12.5f}{t_slow / t_fast:>10.1f}")

    for n, m, p2 in ((8, 4, 0.1), (10, 4, 0.15)):
        dense = _dense(generate(GenSpec(n, m, 1.0, p2, seed=2)))
        fast = lambda: K.enumerate_kernel(*dense, -1, False)
        fast()
        t_fast = best_of(fast, args.repeat)
        t_slow = best_of(lambda: K._enumerate_loops(*dense, -1, False), max(1, args.repeat // 2))
        total = int(fast()[0])
        label = f"enumerate n={n} m={m} ({total} sols)"
        print(f"{label:<34}{t_fast:>12.5f}{t_slow:>12.5f}{t_slow / t_fast:>10.1f}")


if __name__ == "__main__":
    main()
