"""Factorized linear algebra for Kronecker-structured columns.

Two identities drive everything here.  For x = b (x) a = vec(a b^T) and a
weight vector w with M = unvectorize(w, p, q):

    x^T w          = a^T M b                      (score evaluation)
    x_j^T x_i      = (a_j^T a_i) * (b_j^T b_i)    (pairwise inner products)

Scores are therefore computable without ever materializing a d-length
column, and once the two n x n factor Grams are cached, any batched data
inner product costs O(1) per pair with no dependence on d = p*q.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class GramCache:
    """Precomputed factor Grams ga = A^T A and gb = B^T B (both n x n)."""

    ga: np.ndarray
    gb: np.ndarray

    @property
    def n(self) -> int:
        return self.ga.shape[0]


def precompute_grams(ds) -> GramCache:
    """Bit-exactly symmetric factor Grams; cost O(n^2 * max(p, q))."""
    return GramCache(ga=_mirrored_gram(ds.A), gb=_mirrored_gram(ds.B))


def _mirrored_gram(f: np.ndarray) -> np.ndarray:
    g = f.T @ f
    # dgemm does not promise a symmetric result to the last bit; mirror the
    # upper triangle so g[i, j] and g[j, i] are the same float.
    return np.triu(g) + np.triu(g, 1).T


def scores_matrix(ds, weights: np.ndarray) -> np.ndarray:
    """Scores s[k, i] = x_i^T w_k for every row w_k of ``weights`` (k x d).

    The n columns are processed in tiles of max(p, q); each tile is a small
    dense triple product A_tile^T * M_k * B_tile whose diagonal holds the
    tile's scores.  Classical matrix multiplication throughout.
    """
    weights = np.asarray(weights, dtype=np.float64)
    if weights.ndim != 2:
        raise ValueError("weights must be 2-d (k x d)")
    k, d = weights.shape
    p, q, n = ds.p, ds.q, ds.n
    if d != p * q:
        raise ValueError(f"weight length {d} does not match p*q={p * q}")
    # Row k as the p x q matrix whose column-major vectorization is w_k.
    mats = weights.reshape(k, q, p).transpose(0, 2, 1)
    tile = max(p, q)
    out = np.empty((k, n))
    for start in range(0, n, tile):
        stop = min(start + tile, n)
        at = ds.A[:, start:stop]
        bt = ds.B[:, start:stop]
        y = np.matmul(at.T, mats)  # (k, g, q)
        z = np.matmul(y, bt)  # (k, g, g)
        g = stop - start
        idx = np.arange(g)
        out[:, start:stop] = z[:, idx, idx]
    return out


def scores_for_weight(ds, w: np.ndarray) -> np.ndarray:
    """Scores x_i^T w for all i, evaluated as a_i^T unvectorize(w) b_i."""
    w = np.asarray(w, dtype=np.float64)
    if w.ndim != 1:
        raise ValueError("w must be 1-d")
    return scores_matrix(ds, w[np.newaxis, :])[0]


def _check_indices(idx: np.ndarray, n: int) -> np.ndarray:
    idx = np.asarray(idx, dtype=np.int64)
    if idx.ndim != 1:
        raise ValueError("index list must be 1-d")
    if idx.size and (idx.min() < 0 or idx.max() >= n):
        raise IndexError(f"index out of range [0, {n})")
    return idx


def batch_inner(grams: GramCache, idx: np.ndarray, i: int) -> np.ndarray:
    """Inner products x_j^T x_i for j in ``idx``; O(|idx|), no d anywhere."""
    idx = _check_indices(idx, grams.n)
    if not 0 <= i < grams.n:
        raise IndexError(f"index {i} out of range [0, {grams.n})")
    return grams.ga[idx, i] * grams.gb[idx, i]


def batch_inner_all(grams: GramCache, idx: np.ndarray) -> np.ndarray:
    """Matrix P with P[k, i] = x_{idx[k]}^T x_i for every data point i."""
    idx = _check_indices(idx, grams.n)
    return grams.ga[idx, :] * grams.gb[idx, :]


def delta_dot(grams: GramCache, idx: np.ndarray, coeffs: np.ndarray, i: int) -> float:
    """delta^T x_i for delta = sum_k coeffs[k] * x_{idx[k]}; O(|idx|)."""
    coeffs = np.asarray(coeffs, dtype=np.float64)
    if coeffs.shape != (np.asarray(idx).size,):
        raise ValueError("coeffs length must match index list")
    return float(np.dot(coeffs, batch_inner(grams, idx, i)))
