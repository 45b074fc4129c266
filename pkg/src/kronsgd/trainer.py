"""Structured SGD whose per-step cost does not depend on the data dimension.

Per step, with batch S of size b on n points and m neurons:

  1. query the batch trees for the fire sets L_i = {r : leaf(i, r) > tau}
     and read the batch predictions u_i off the leaf values,
  2. form the changed-neuron set ell = union of the L_i (|ell| <= b * Q),
  3. for each changed neuron r build the batch coefficient vector
     c[i] = eta * n / (b * sqrt(m)) * a_r * [r in L_i] * (y_i - u_i),
     which expresses the weight update as w_r += sum_i c[i] * x_i,
  4. bump every leaf (i, r) by the factorized inner product
     sum_{j in S} c[j] * x_j^T x_i, read from the Gram cache, and repair
     the tree maxima.

Weights never exist densely during training: each neuron carries a running
per-data-point coefficient row (w_r(t) = w_r(0) + sum_j coeffs[r, j] * x_j),
so steps touch only n-length state.  Dense weights are reconstructed on
export only.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np

from .kernels import GramCache, batch_inner_all, precompute_grams, scores_matrix
from .maxtree import TreeBank
from .network import Trajectory, init_network
from .seeding import BatchSampler


@dataclass
class StepReport:
    """What one step saw and did."""

    step: int
    batch: np.ndarray
    u_batch: np.ndarray
    fire_sets: list
    changed: np.ndarray  # ell: union of fire sets, ascending
    q_max: int
    q_mean: float
    sum_fire: int
    k: int  # |ell|
    query_ns: int = 0
    forward_ns: int = 0
    delta_ns: int = 0
    update_ns: int = 0

    @property
    def total_ns(self) -> int:
        return self.query_ns + self.forward_ns + self.delta_ns + self.update_ns


@dataclass
class FireStats:
    steps: int
    q_max: int
    q_mean: float
    k_max: int
    per_step_q_max: np.ndarray
    per_step_q_mean: np.ndarray
    per_step_k: np.ndarray


class TrainerState:
    """Tree bank + Gram cache + coefficient ledger for one training run."""

    def __init__(self, ds, bank: TreeBank, grams: GramCache, signs, tau, seed, w0):
        self.ds = ds
        self.bank = bank
        self.grams = grams
        self.signs = signs
        self.tau = float(tau)
        self.seed = int(seed)
        self.n = bank.n
        self.m = bank.m
        self.sqrt_m = math.sqrt(self.m)
        self.w0 = w0  # initial dense weights; read only at export time
        self.step_count = 0
        # Accumulated update coefficients: w_r(t) = w_r(0) + coeffs[r] @ X^T.
        self.coeffs = np.zeros((self.m, self.n))
        self.touched = np.zeros((self.m, self.n), dtype=bool)
        self.fire_log: list[tuple[int, float, int, int]] = []  # (q_max, q_mean, k, sum)
        self.timings = {"query": 0, "forward": 0, "delta": 0, "update": 0}
        self.sampler = BatchSampler(seed, self.n)
        self.y = ds.y.copy()


def init_trainer(ds, m: int, tau: float, seed: int, backend: str | None = None) -> TrainerState:
    """Initialize the same network as ``init_network(m, d, tau, seed)``, score
    it against every data point through the factorized kernels, build the
    tree bank, and cache the factor Grams.  The only O(d) work of a run."""
    if m < 1:
        raise ValueError("m must be >= 1")
    net = init_network(m, ds.p * ds.q, tau, seed)
    scores = scores_matrix(ds, net.weights)  # (m, n)
    bank = TreeBank(np.ascontiguousarray(scores.T), backend=backend)
    grams = precompute_grams(ds)
    return TrainerState(ds, bank, grams, net.signs, tau, seed, net.weights)


def step(state: TrainerState, eta: float, s_batch: int, sampler: BatchSampler | None = None) -> StepReport:
    """One SGD step; never touches a d-length array."""
    if not 1 <= s_batch <= state.n:
        raise ValueError(f"s_batch must be in [1, {state.n}]")
    sampler = sampler or state.sampler
    bank, tau, signs = state.bank, state.tau, state.signs

    clock = time.perf_counter_ns
    t0 = clock()
    batch = sampler.draw(s_batch)
    fire_sets = [bank.query_stats(i, tau)[0] for i in batch]
    t1 = clock()

    u_batch = np.zeros(s_batch)
    for pos, (i, fire) in enumerate(zip(batch, fire_sets)):
        if fire.size:
            values = bank.leaf_values(i, fire)
            u_batch[pos] = signs[fire] @ (values - tau) / state.sqrt_m
    t2 = clock()

    sizes = [fs.size for fs in fire_sets]
    sum_fire = int(sum(sizes))
    changed = np.unique(np.concatenate(fire_sets)) if sum_fire else np.empty(0, dtype=np.int64)
    k = int(changed.size)
    if k > sum_fire:
        raise AssertionError("changed-neuron count exceeded the sum of fire-set sizes")

    if k:
        base = eta * state.n / (s_batch * state.sqrt_m)
        coeff = np.zeros((k, s_batch))
        for pos, (i, fire) in enumerate(zip(batch, fire_sets)):
            if fire.size:
                rows = np.searchsorted(changed, fire)
                coeff[rows, pos] = base * signs[fire] * (state.y[i] - u_batch[pos])
        state.coeffs[np.ix_(changed, batch)] += coeff
        state.touched[np.ix_(changed, batch)] = True
        pair = batch_inner_all(state.grams, batch)  # (b, n)
        deltas = np.matmul(pair.T, coeff.T)  # (n, k): delta for leaf (i, r)
        t3 = clock()
        bank.apply_deltas(changed, np.ascontiguousarray(deltas))
        t4 = clock()
    else:
        t3 = t4 = clock()

    state.step_count += 1
    q_max = int(max(sizes, default=0))
    q_mean = float(sum_fire / s_batch)
    state.fire_log.append((q_max, q_mean, k, sum_fire))
    report = StepReport(
        step=state.step_count,
        batch=batch,
        u_batch=u_batch,
        fire_sets=fire_sets,
        changed=changed,
        q_max=q_max,
        q_mean=q_mean,
        sum_fire=sum_fire,
        k=k,
        query_ns=t1 - t0,
        forward_ns=t2 - t1,
        delta_ns=t3 - t2,
        update_ns=t4 - t3,
    )
    for phase, ns in (("query", report.query_ns), ("forward", report.forward_ns),
                      ("delta", report.delta_ns), ("update", report.update_ns)):
        state.timings[phase] += ns
    return report


def predict_from_trees(state: TrainerState, i: int) -> float:
    """Prediction for point i from its tree: terms off the fire set vanish."""
    fire = state.bank.query(i, state.tau)
    if not fire.size:
        return 0.0
    values = state.bank.leaf_values(i, fire)
    return float(state.signs[fire] @ (values - state.tau) / state.sqrt_m)


def predict_all_from_trees(state: TrainerState) -> np.ndarray:
    return np.array([predict_from_trees(state, i) for i in range(state.n)])


def full_loss(state: TrainerState) -> float:
    u = predict_all_from_trees(state)
    return float(np.sum((u - state.y) ** 2))


def train(
    state: TrainerState,
    iters: int,
    eta: float,
    s_batch: int,
    eval_every: int = 0,
    record_reports: bool = True,
) -> Trajectory:
    """Run ``iters`` steps off the state's batch sampler.

    Full-loss evaluations (every ``eval_every`` steps; 0 disables) go through
    tree queries and are excluded from the per-step timings.
    """
    if iters < 0:
        raise ValueError("iters must be >= 0")
    traj = Trajectory(reports=[] if record_reports else None)
    traj.initial_loss = full_loss(state)
    traj.losses.append((state.step_count, traj.initial_loss))
    start = state.step_count
    for t in range(1, iters + 1):
        report = step(state, eta, s_batch)
        traj.batches.append(report.batch)
        traj.u_batches.append(report.u_batch)
        traj.step_ns.append(report.total_ns)
        if record_reports:
            traj.reports.append(report)
        if eval_every > 0 and t % eval_every == 0 and t != iters:
            traj.losses.append((start + t, full_loss(state)))
    traj.final_u = predict_all_from_trees(state)
    if iters > 0:
        traj.losses.append((start + iters, float(np.sum((traj.final_u - state.y) ** 2))))
    return traj


def fire_statistics(state: TrainerState) -> FireStats:
    """Aggregate per-step fire-set observations recorded so far."""
    if not state.fire_log:
        raise ValueError("no steps recorded")
    log = np.asarray(state.fire_log, dtype=np.float64)
    return FireStats(
        steps=len(state.fire_log),
        q_max=int(log[:, 0].max()),
        q_mean=float(log[:, 1].mean()),
        k_max=int(log[:, 2].max()),
        per_step_q_max=log[:, 0].astype(np.int64),
        per_step_q_mean=log[:, 1],
        per_step_k=log[:, 2].astype(np.int64),
    )


def weight_movement(state: TrainerState, r: int) -> float:
    """||w_r(t) - w_r(0)||_2 from the coefficient ledger alone.

    With c the touched coefficients and G the pairwise data inner products,
    the movement is sqrt(c^T G c); O(k^2) for k touched entries.
    """
    if not 0 <= r < state.m:
        raise IndexError(f"neuron index {r} out of range [0, {state.m})")
    idx = np.flatnonzero(state.touched[r])
    if not idx.size:
        return 0.0
    c = state.coeffs[r, idx]
    pair = state.grams.ga[np.ix_(idx, idx)] * state.grams.gb[np.ix_(idx, idx)]
    return math.sqrt(max(float(c @ pair @ c), 0.0))


def export_weights(state: TrainerState) -> np.ndarray:
    """Dense m x d weights w_r(t) = w_r(0) + sum_j coeffs[r, j] x_j.

    The one place training state is allowed to meet d-length vectors again;
    cost O(m*d + touched_entries*d).
    """
    from .data import materialize_matrix

    weights = state.w0.copy()
    rows = np.flatnonzero(state.touched.any(axis=1))
    if rows.size:
        x_mat = materialize_matrix(state.ds)
        weights[rows] += state.coeffs[rows] @ x_mat.T
    return weights
