"""Kernel-matrix diagnostics for convergence-parameter estimation.

Three flavors of the data-dependent n x n matrix are exposed:

  h_dis      entry (i, j) = (1/m) sum_r x_i^T x_j [w_r^T x_i > tau][w_r^T x_j > tau]
  h_cts_mc   the same with w averaged over N(0, I_d), estimated by Monte
             Carlo with per-entry standard errors
  h_dynamic  h_dis at the trainer's current iterate, indicators read off
             tree leaves (no dense weights needed)

The smallest eigenvalue of the continuous matrix is the convergence-rate
parameter; ``lambda_min_sym`` computes it with cyclic Jacobi rotations.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .kernels import precompute_grams, scores_matrix
from .seeding import mc_shard

_MC_CHUNK = 65536  # draws per shard; fixed so results do not depend on workers


@dataclass
class GramReport:
    matrix: np.ndarray
    lambda_min: float
    kind: str  # one of {"cts-mc", "dis", "dynamic"}
    samples_used: int | None = None
    entry_se: np.ndarray | None = None  # cts-mc only
    lambda_min_se: float | None = None  # conservative scalar bound, cts-mc only


def _pair_products(ds, grams=None) -> np.ndarray:
    g = grams or precompute_grams(ds)
    return g.ga * g.gb


def _indicator_counts(scores: np.ndarray, tau: float) -> np.ndarray:
    """F^T F for F = [scores > tau]; exact integer-valued floats."""
    fired = (scores > tau).astype(np.float64)
    return fired.T @ fired


def h_dis(net, ds, grams=None) -> GramReport:
    """Sampled kernel matrix of a dense network; exact evaluation."""
    if net.d != ds.p * ds.q:
        raise ValueError(f"network d={net.d} does not match dataset d={ds.p * ds.q}")
    scores = scores_matrix(ds, net.weights)
    # pair * (counts / m): same association as the Monte-Carlo estimator, so
    # the two agree exactly when fed the same weight sample.
    matrix = _pair_products(ds, grams) * (_indicator_counts(scores, net.tau) / net.m)
    return GramReport(matrix=matrix, lambda_min=lambda_min_sym(matrix), kind="dis")


def h_cts_mc(ds, tau: float, samples: int, seed: int, workers: int = 1) -> GramReport:
    """Monte-Carlo estimate of the population kernel matrix.

    Draws are split into fixed-size shards with sub-seeds derived from
    ``seed``, so the estimate is bit-identical for any worker count.
    """
    if samples < 1:
        raise ValueError("samples must be >= 1")
    d = ds.p * ds.q
    sizes = [_MC_CHUNK] * (samples // _MC_CHUNK)
    if samples % _MC_CHUNK:
        sizes.append(samples % _MC_CHUNK)

    def shard_counts(args):
        shard_id, size = args
        draws = mc_shard(seed, shard_id).standard_normal((size, d))
        return _indicator_counts(scores_matrix(ds, draws), tau)

    jobs = list(enumerate(sizes))
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(shard_counts, jobs))
    else:
        parts = [shard_counts(job) for job in jobs]
    counts = np.zeros((ds.n, ds.n))
    for part in parts:  # integer-valued, so summation order is immaterial
        counts += part
    prob = counts / samples
    pair = _pair_products(ds)
    matrix = pair * prob
    entry_se = np.abs(pair) * np.sqrt(np.maximum(prob * (1.0 - prob), 0.0) / samples)
    return GramReport(
        matrix=matrix,
        lambda_min=lambda_min_sym(matrix),
        kind="cts-mc",
        samples_used=samples,
        entry_se=entry_se,
        # |lambda_min(H + E) - lambda_min(H)| <= ||E||_2 <= ||E||_F.
        lambda_min_se=float(np.linalg.norm(entry_se)),
    )


def h_dynamic(state, ds=None) -> GramReport:
    """Kernel matrix at the trainer's current iterate, read from tree leaves."""
    leaves = state.bank.leaf_matrix()  # (n, m)
    fired = (leaves > state.tau).astype(np.float64)
    counts = fired @ fired.T
    pair = state.grams.ga * state.grams.gb
    matrix = pair * (counts / state.m)
    return GramReport(matrix=matrix, lambda_min=lambda_min_sym(matrix), kind="dynamic")


def lambda_min_sym(matrix: np.ndarray, max_sweeps: int = 100) -> float:
    """Smallest eigenvalue of a symmetric matrix via cyclic Jacobi rotations.

    Sweeps run until the off-diagonal Frobenius norm drops below
    1e-12 * ||M||_F, leaving the diagonal accurate to ~1e-9 * ||M||_2.
    Intended for desk-scale matrices (n <= 2048).
    """
    m = np.asarray(matrix, dtype=np.float64)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ValueError("matrix must be square")
    if not np.all(np.isfinite(m)):
        raise ValueError("matrix must be finite")
    if m.shape[0] > 2048:
        raise ValueError("matrices beyond n=2048 are out of scope")
    asym = float(np.max(np.abs(m - m.T))) if m.size else 0.0
    if asym > 1e-9:
        raise ValueError(f"matrix is asymmetric by {asym:.3e} (limit 1e-9)")
    n = m.shape[0]
    if n == 1:
        return float(m[0, 0])
    a = (m + m.T) / 2.0
    fro = float(np.linalg.norm(a))
    if fro == 0.0:
        return 0.0
    target = 1e-12 * fro
    off_mask = ~np.eye(n, dtype=bool)
    for _ in range(max_sweeps):
        # Norm of the off-diagonal part, computed directly: the textbook
        # ||A||_F^2 - ||diag||^2 form cancels catastrophically near
        # convergence and bottoms out around sqrt(eps) * ||A||_F.
        off = float(np.linalg.norm(a[off_mask]))
        if off <= target:
            return float(np.min(np.diag(a)))
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[p, q]
                if apq == 0.0:
                    continue
                theta = (a[q, q] - a[p, p]) / (2.0 * apq)
                if abs(theta) > 1e150:  # theta**2 would overflow; t -> 1/(2 theta)
                    t = 0.5 / theta
                else:
                    t = math.copysign(1.0, theta) / (abs(theta) + math.sqrt(theta * theta + 1.0))
                c = 1.0 / math.sqrt(t * t + 1.0)
                s = t * c
                col_p = a[:, p].copy()
                col_q = a[:, q].copy()
                a[:, p] = c * col_p - s * col_q
                a[:, q] = s * col_p + c * col_q
                row_p = a[p, :].copy()
                row_q = a[q, :].copy()
                a[p, :] = c * row_p - s * row_q
                a[q, :] = s * row_p + c * row_q
                a[p, q] = 0.0
                a[q, p] = 0.0
    raise RuntimeError("Jacobi sweep limit reached without convergence")
