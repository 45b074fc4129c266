"""Wall-clock benchmarks: the d-sweep behind ``kron-sgd bench``.

Per-step medians cover the step bodies only; trainer initialization is
timed separately (it is the one phase that legitimately grows with d) and
loss evaluations are disabled entirely during timing.
"""

from __future__ import annotations

import math
import statistics
import time
from dataclasses import dataclass

from .data import generate_synthetic
from .network import init_network, train_naive
from .trainer import init_trainer, step


@dataclass
class SweepRow:
    d: int
    p: int
    q: int
    fast_ns_median: float
    naive_ns_median: float
    init_ns: int


def factor_dimension(d: int) -> tuple[int, int] | None:
    """Split d = p*q with p, q as close to sqrt(d) as possible.

    Returns None when the best split is too lopsided (more than 4x apart),
    which would break the near-square tiling assumption.
    """
    if d < 1:
        return None
    p = math.isqrt(d)
    while p >= 1 and d % p:
        p -= 1
    q = d // p
    if q > 4 * p:
        return None
    return p, q


def time_fast_steps(ds, m, tau, eta, s_batch, iters, seed, backend=None):
    """(median per-step ns, init ns) for the structured trainer."""
    t0 = time.perf_counter_ns()
    state = init_trainer(ds, m, tau, seed, backend=backend)
    init_ns = time.perf_counter_ns() - t0
    step(state, eta, s_batch)  # warm caches and allocator pools
    samples = []
    for _ in range(iters):
        t1 = time.perf_counter_ns()
        step(state, eta, s_batch)
        samples.append(time.perf_counter_ns() - t1)
    return statistics.median(samples), init_ns


def time_naive_steps(ds, m, tau, eta, s_batch, iters, seed):
    """Median per-step ns for the dense reference trainer."""
    net = init_network(m, ds.p * ds.q, tau, seed)
    # One extra iteration as warmup; its timing sample is dropped.
    traj = train_naive(net, ds, eta, s_batch, iters + 1, seed)
    return statistics.median(traj.step_ns[1:])


def dimension_sweep(dims, n, m, tau, eta, s_batch, iters, seed, backend=None, warn=print):
    """Benchmark both trainers across data dimensions; skips bad factorings."""
    rows = []
    for d in dims:
        split = factor_dimension(d)
        if split is None:
            warn(f"skipping d={d}: no near-square factoring p*q")
            continue
        p, q = split
        ds = generate_synthetic(n, p, q, seed)
        fast_ns, init_ns = time_fast_steps(ds, m, tau, eta, s_batch, iters, seed, backend)
        naive_ns = time_naive_steps(ds, m, tau, eta, s_batch, iters, seed)
        rows.append(SweepRow(d=d, p=p, q=q, fast_ns_median=fast_ns,
                             naive_ns_median=naive_ns, init_ns=init_ns))
    return rows
