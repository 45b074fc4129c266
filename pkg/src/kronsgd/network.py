"""Dense two-layer shifted-ReLU network and its naive SGD trainer.

prediction:  f(x) = (1/sqrt(m)) * sum_r a_r * max(w_r^T x - tau, 0)
batch loss:  L(W, S) = (n/|S|) * (1/2) * sum_{i in S} (f(x_i) - y_i)^2
update:      w_r <- w_r - eta * G_r,
             G_r = (n/|S|) * (1/sqrt(m)) * sum_{i in S} (u_i - y_i) * a_r
                   * [w_r^T x_i > tau] * x_i

Everything in this module works on explicit d-length weight vectors and
materialized data columns.  It is intentionally the slow, obviously-correct
path: the reference the structured trainer is checked against.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np

from .data import materialize_matrix
from .seeding import BatchSampler, substream


@dataclass
class TwoLayerNet:
    """m weight vectors (rows of ``weights``), +-1 output signs, shift tau."""

    weights: np.ndarray  # (m, d)
    signs: np.ndarray  # (m,), entries in {-1.0, +1.0}
    tau: float

    def __post_init__(self):
        self.weights = np.ascontiguousarray(self.weights, dtype=np.float64)
        self.signs = np.ascontiguousarray(self.signs, dtype=np.float64)
        if self.weights.ndim != 2 or self.signs.shape != (self.weights.shape[0],):
            raise ValueError("weights must be (m, d) with one sign per row")
        if not np.all(np.abs(self.signs) == 1.0):
            raise ValueError("signs must be +-1")
        if not self.tau >= 0.0:
            raise ValueError("tau must be >= 0")

    @property
    def m(self) -> int:
        return self.weights.shape[0]

    @property
    def d(self) -> int:
        return self.weights.shape[1]


@dataclass
class Trajectory:
    """Recorded run of either trainer."""

    batches: list = field(default_factory=list)
    u_batches: list = field(default_factory=list)
    losses: list = field(default_factory=list)  # (iteration, full squared loss)
    initial_loss: float = 0.0
    final_u: np.ndarray | None = None
    final_weights: np.ndarray | None = None  # naive trainer only
    reports: list | None = None  # fast trainer only
    gradient_ratios: list | None = None  # naive diagnostic, when recorded
    step_ns: list = field(default_factory=list)
    phase_ns: list = field(default_factory=list)  # (query, forward, delta, update)


def resolve_tau(m: int) -> float:
    """Default shift sqrt(ln(m)/2), which puts the expected fire-set size at
    m^(3/4) scale."""
    if m < 1:
        raise ValueError("m must be >= 1")
    return math.sqrt(math.log(m) / 2.0)


def resolve_eta(lambda_hat: float, s_batch: int, n: int) -> float:
    """Default step size lambda_hat * s_batch / n^3 (proportionality 1.0)."""
    return lambda_hat * s_batch / float(n) ** 3


def init_network(m: int, d: int, tau: float, seed: int) -> TwoLayerNet:
    """Standard-normal weights, uniform +-1 signs; deterministic given seed."""
    if m < 1 or d < 1:
        raise ValueError("m and d must be >= 1")
    weights = substream(seed, "weights").standard_normal((m, d))
    bits = substream(seed, "signs").integers(0, 2, size=m)
    signs = np.where(bits == 1, 1.0, -1.0)
    return TwoLayerNet(weights=weights, signs=signs, tau=float(tau))


def phi_tau(x: float, tau: float) -> float:
    """Shifted ReLU max(x - tau, 0)."""
    return max(x - tau, 0.0)


def predict(net: TwoLayerNet, x: np.ndarray) -> float:
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (net.d,):
        raise ValueError(f"input length {x.shape} does not match d={net.d}")
    scores = net.weights @ x
    return float(net.signs @ np.maximum(scores - net.tau, 0.0) / math.sqrt(net.m))


def predict_all(net: TwoLayerNet, x_mat: np.ndarray) -> np.ndarray:
    """Predictions for every column of a dense d x n data matrix."""
    scores = net.weights @ x_mat
    return (net.signs @ np.maximum(scores - net.tau, 0.0)) / math.sqrt(net.m)


def _batch_gradient(weights, signs, tau, x_batch, coef):
    """Gradient rows for one batch; coef[k] = (n/|S|) (1/sqrt m) (u_k - y_k)."""
    scores = weights @ x_batch  # (m, b)
    contrib = (scores > tau) * coef[np.newaxis, :]
    return signs[:, np.newaxis] * (contrib @ x_batch.T)


def sgd_gradient_naive(net: TwoLayerNet, ds, batch, u_batch, y_batch) -> np.ndarray:
    """Exact dense batch gradient, one row per neuron (m x d)."""
    batch = np.asarray(batch, dtype=np.int64)
    u_batch = np.asarray(u_batch, dtype=np.float64)
    y_batch = np.asarray(y_batch, dtype=np.float64)
    if not (batch.shape == u_batch.shape == y_batch.shape) or batch.ndim != 1:
        raise ValueError("batch, u_batch, y_batch must be aligned 1-d arrays")
    x_mat = materialize_matrix(ds)
    x_batch = x_mat[:, batch]
    coef = (ds.n / batch.size) * (u_batch - y_batch) / math.sqrt(net.m)
    return _batch_gradient(net.weights, net.signs, net.tau, x_batch, coef)


def gradient_norm_check(grads, u_full, y, m, s_batch, n):
    """Check ||G_r||_2 <= n / sqrt(m * s_batch) * ||u - y||_2 for every r.

    Returns (holds, max_ratio).  A zero residual gives ratio 0.
    """
    norms = np.linalg.norm(np.asarray(grads, dtype=np.float64), axis=1)
    bound = n / math.sqrt(m * s_batch) * float(np.linalg.norm(u_full - y))
    if bound == 0.0:
        ratio = 0.0 if norms.max(initial=0.0) == 0.0 else math.inf
    else:
        ratio = float(norms.max(initial=0.0) / bound)
    return ratio <= 1.0 + 1e-12, ratio


def train_naive(
    net: TwoLayerNet,
    ds,
    eta: float,
    s_batch: int,
    iters: int,
    seed: int,
    eval_every: int = 0,
    record_gradient_bound: bool = False,
) -> Trajectory:
    """Reference SGD loop on dense weights; ``net`` itself is not mutated.

    Batches come from the shared ``batches`` substream of ``seed``, so a fast
    trainer built from the same seed sees the identical batch sequence.  The
    full loss ||u(t) - y||_2^2 is recorded at t=0, every ``eval_every`` steps
    (0 disables intermediate evals), and at t=iters.
    """
    if iters < 0:
        raise ValueError("iters must be >= 0")
    if not 1 <= s_batch <= ds.n:
        raise ValueError(f"s_batch must be in [1, {ds.n}]")
    sampler = BatchSampler(seed, ds.n)
    x_mat = materialize_matrix(ds)
    weights = net.weights.copy()
    signs, tau, m = net.signs, net.tau, net.m
    sqrt_m = math.sqrt(m)
    traj = Trajectory(gradient_ratios=[] if record_gradient_bound else None)

    def full_u(w):
        return (signs @ np.maximum(w @ x_mat - tau, 0.0)) / sqrt_m

    u0 = full_u(weights)
    traj.initial_loss = float(np.sum((u0 - ds.y) ** 2))
    traj.losses.append((0, traj.initial_loss))
    clock = time.perf_counter_ns
    for t in range(1, iters + 1):
        u_pre = full_u(weights) if record_gradient_bound else None
        t0 = clock()
        batch = sampler.draw(s_batch)
        x_batch = x_mat[:, batch]
        scores_b = weights @ x_batch
        u_batch = (signs @ np.maximum(scores_b - tau, 0.0)) / sqrt_m
        t1 = clock()
        coef = (ds.n / s_batch) * (u_batch - ds.y[batch]) / sqrt_m
        grads = signs[:, np.newaxis] * (((scores_b > tau) * coef[np.newaxis, :]) @ x_batch.T)
        t2 = clock()
        weights -= eta * grads
        t3 = clock()
        traj.step_ns.append(t3 - t0)
        traj.phase_ns.append((0, t1 - t0, t2 - t1, t3 - t2))
        traj.batches.append(batch)
        traj.u_batches.append(u_batch)
        if record_gradient_bound:
            # Bound uses the residual of the pre-update weights.
            _, ratio = gradient_norm_check(grads, u_pre, ds.y, m, s_batch, ds.n)
            traj.gradient_ratios.append(ratio)
        if eval_every > 0 and t % eval_every == 0 and t != iters:
            u = full_u(weights)
            traj.losses.append((t, float(np.sum((u - ds.y) ** 2))))
    traj.final_u = full_u(weights)
    if iters > 0:
        traj.losses.append((iters, float(np.sum((traj.final_u - ds.y) ** 2))))
    traj.final_weights = weights
    return traj
