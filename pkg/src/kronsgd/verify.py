"""Headless self-verification suites behind ``kron-sgd verify``.

Each suite runs a batch of randomized property checks against an
independent oracle and reports (cases, failures, details).  On failure the
offending case parameters are serialized so the exact case can be replayed.
The optional fault injection flips one internal tree node mid-sequence and
exists purely to prove the harness can fail.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .data import generate_synthetic, materialize_column, vectorize
from .kernels import batch_inner, delta_dot, precompute_grams, scores_for_weight
from .maxtree import TreeBank
from .network import init_network, resolve_tau, train_naive
from .trainer import export_weights, init_trainer, train

SUITE_NAMES = ("tree", "tensor", "equivalence", "fire", "kbound")


@dataclass
class SuiteResult:
    name: str
    cases: int = 0
    failures: list = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.failures

    def fail(self, **details):
        self.failures.append(details)


def run_suite(name: str, seed: int = 0, inject_tree_fault: bool = False) -> SuiteResult:
    if name == "tree":
        return tree_suite(seed, inject_tree_fault=inject_tree_fault)
    if name == "tensor":
        return tensor_suite(seed)
    if name == "equivalence":
        return equivalence_suite(seed)
    if name == "fire":
        return fire_suite(seed)
    if name == "kbound":
        return kbound_suite(seed)
    raise ValueError(f"unknown suite {name!r}; have {SUITE_NAMES}")


def tree_suite(seed: int = 0, sequences: int = 200, inject_tree_fault: bool = False) -> SuiteResult:
    """Randomized op sequences vs a dense shadow array plus heap checks."""
    result = SuiteResult("tree")
    rng = np.random.default_rng(seed)
    injected = False
    for case in range(sequences):
        m = int(rng.integers(1, 258))
        n = int(rng.integers(1, 4))
        scores = rng.uniform(-5.0, 5.0, size=(n, m))
        bank = TreeBank(scores)
        shadow = scores.copy()
        if inject_tree_fault and not injected and bank.m_pad > 1:
            bank.nodes[0, 0] += 1000.0  # deliberate corruption
            injected = True
            result.cases += 1
            if not bank.heap_ok():
                result.fail(case=case, seed=seed, op="injected-fault")
        ops_ok = True
        for _ in range(12):
            result.cases += 1
            if rng.random() < 0.5:
                i = int(rng.integers(n))
                r = int(rng.integers(m))
                delta = float(rng.uniform(-5.0, 5.0))
                bank.update_leaf_delta(i, r, delta)
                shadow[i, r] += delta
            else:
                i = int(rng.integers(n))
                if rng.random() < 0.3 and m > 0:
                    tau = float(shadow[i, rng.integers(m)])  # exact leaf value
                else:
                    tau = float(rng.uniform(-6.0, 6.0))
                got = bank.query(i, tau)
                want = np.flatnonzero(shadow[i] > tau)
                if not np.array_equal(got, want):
                    result.fail(case=case, seed=seed, op="query", i=i, tau=tau)
                    ops_ok = False
            if not bank.heap_ok():
                result.fail(case=case, seed=seed, op="heap", m=m, n=n)
                ops_ok = False
            if not ops_ok:
                break
        if not ops_ok and not inject_tree_fault:
            break
    return result


def tensor_suite(seed: int = 0, instances: int = 200) -> SuiteResult:
    """Factorized products vs materialized-column oracles."""
    result = SuiteResult("tensor")
    rng = np.random.default_rng(seed)
    for case in range(instances):
        result.cases += 1
        p = int(rng.integers(1, 9))
        q = int(rng.integers(1, 9))
        n = int(rng.integers(2, 13))
        ds = generate_synthetic(n, p, q, seed=int(rng.integers(2**31)))
        w = rng.standard_normal(p * q)
        scores = scores_for_weight(ds, w)
        cols = [materialize_column(ds, i) for i in range(n)]
        for i in range(n):
            want = float(cols[i] @ w)
            if abs(scores[i] - want) > 1e-10 * (1.0 + abs(want)):
                result.fail(case=case, kind="score", i=i, p=p, q=q, n=n)
        grams = precompute_grams(ds)
        i = int(rng.integers(n))
        idx = rng.choice(n, size=min(4, n), replace=False).astype(np.int64)
        idx.sort()
        inner = batch_inner(grams, idx, i)
        coeffs = rng.standard_normal(idx.size)
        got = delta_dot(grams, idx, coeffs, i)
        want_inner = np.array([cols[j] @ cols[i] for j in idx])
        want_dot = float(coeffs @ want_inner)
        if np.abs(inner - want_inner).max() > 1e-10 * (1.0 + np.abs(want_inner).max()):
            result.fail(case=case, kind="batch_inner", i=i, p=p, q=q, n=n)
        if abs(got - want_dot) > 1e-10 * (1.0 + abs(want_dot)):
            result.fail(case=case, kind="delta_dot", i=i, p=p, q=q, n=n)
    return result


def equivalence_suite(seed: int = 0, iters: int = 60) -> SuiteResult:
    """Fast and naive trainer agree step-for-step on a shared batch stream."""
    result = SuiteResult("equivalence")
    n, p, q, m, s_batch = 16, 2, 4, 64, 4
    ds = generate_synthetic(n, p, q, seed)
    tau = resolve_tau(m)
    eta = 0.05
    state = init_trainer(ds, m, tau, seed)
    fast = train(state, iters, eta, s_batch)
    naive = train_naive(init_network(m, p * q, tau, seed), ds, eta, s_batch, iters, seed)
    for t in range(iters):
        result.cases += 1
        div = float(np.abs(fast.u_batches[t] - naive.u_batches[t]).max())
        if div > 1e-8:
            result.fail(t=t, divergence=div, seed=seed)
    result.cases += 1
    w_div = float(np.abs(export_weights(state) - naive.final_weights).max())
    if w_div > 1e-7:
        result.fail(t=iters, weight_divergence=w_div, seed=seed)
    return result


def fire_suite(seed: int = 0, m: int = 4096, n: int = 16) -> SuiteResult:
    """Init fire sets obey the tail bound: count <= 3 * m^(3/4) per point and
    the empirical mean sits within 6 binomial sigmas of m * P(N(0,1) > tau)."""
    result = SuiteResult("fire")
    tau = resolve_tau(m)
    ds = generate_synthetic(n, 4, 4, seed)
    state = init_trainer(ds, m, tau, seed)
    counts = np.array([state.bank.query(i, tau).size for i in range(n)], dtype=float)
    bound = 3.0 * m ** 0.75
    for i in range(n):
        result.cases += 1
        if counts[i] > bound:
            result.fail(i=i, count=int(counts[i]), bound=bound, seed=seed)
    prob = 0.5 * math.erfc(tau / math.sqrt(2.0))
    sigma = math.sqrt(m * prob * (1.0 - prob) / n)
    result.cases += 1
    if abs(counts.mean() - m * prob) > 6.0 * sigma:
        result.fail(mean=counts.mean(), expect=m * prob, sigma=sigma, seed=seed)
    return result


def kbound_suite(seed: int = 0, iters: int = 40) -> SuiteResult:
    """|ell(t)| never exceeds the sum of the batch fire-set sizes."""
    result = SuiteResult("kbound")
    ds = generate_synthetic(16, 3, 3, seed)
    m = 128
    state = init_trainer(ds, m, resolve_tau(m), seed)
    traj = train(state, iters, eta=0.05, s_batch=4)
    for report in traj.reports:
        result.cases += 1
        if report.k > report.sum_fire:
            result.fail(step=report.step, k=report.k, sum_fire=report.sum_fire, seed=seed)
    return result
