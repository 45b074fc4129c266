#!/usr/bin/env python3
"""Compare the compiled tree core against the pure-NumPy fallback.

Times the four tree kernels in isolation and a short end-to-end training
run for each backend, then prints a table with speedups.  Usage:

    python benchmarks/backend_compare.py [--n 64] [--m 1024] [--iters 200]
"""

import argparse
import statistics
import time

import numpy as np

from kronsgd import HAVE_COMPILED, TreeBank, generate_synthetic, resolve_tau
from kronsgd.trainer import init_trainer, step


def _median_ns(fn, repeats):
    samples = []
    for _ in range(repeats):
        t0 = time.perf_counter_ns()
        fn()
        samples.append(time.perf_counter_ns() - t0)
    return statistics.median(samples)


def bench_backend(backend, n, m, iters, seed):
    rng = np.random.default_rng(seed)
    scores = rng.standard_normal((n, m))
    tau = resolve_tau(m)
    out = {}

    out["build"] = _median_ns(lambda: TreeBank(scores, backend=backend), 5)

    bank = TreeBank(scores, backend=backend)
    queries = iter(rng.integers(0, n, size=iters * 4))
    out["query"] = _median_ns(lambda: bank.query(int(next(queries)), tau), iters)

    updates = iter(zip(rng.integers(0, n, size=iters * 4),
                       rng.integers(0, m, size=iters * 4),
                       rng.uniform(-0.1, 0.1, size=iters * 4)))

    def one_update():
        i, r, delta = next(updates)
        bank.update_leaf_delta(int(i), int(r), float(delta))

    out["update_leaf"] = _median_ns(one_update, iters)

    k = min(m, 64)
    leaf_rs = np.sort(rng.choice(m, size=k, replace=False)).astype(np.int64)
    deltas = rng.uniform(-0.01, 0.01, size=(n, k))
    out["apply_deltas"] = _median_ns(lambda: bank.apply_deltas(leaf_rs, deltas), iters)

    ds = generate_synthetic(n, 4, 4, seed)
    state = init_trainer(ds, m, tau, seed, backend=backend)
    step(state, 1e-4, 4)  # warmup
    out["train_step"] = _median_ns(lambda: step(state, 1e-4, 4), iters)
    return out


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--n", type=int, default=64)
    parser.add_argument("--m", type=int, default=1024)
    parser.add_argument("--iters", type=int, default=200)
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args()

    if not HAVE_COMPILED:
        print("compiled core not available; run `pip install -e .` first")
        return 1

    results = {
        backend: bench_backend(backend, args.n, args.m, args.iters, args.seed)
        for backend in ("compiled", "python")
    }
    kernels = list(results["compiled"])
    width = max(len(k) for k in kernels)
    print(f"n={args.n} m={args.m} iters={args.iters} (median ns per call)")
    print(f"{'kernel':<{width}}  {'compiled':>12}  {'python':>12}  {'speedup':>8}")
    for kernel in kernels:
        fast = results["compiled"][kernel]
        slow = results["python"][kernel]
        print(f"{kernel:<{width}}  {fast:>12.0f}  {slow:>12.0f}  {slow / fast:>7.1f}x")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
