"""Pure-NumPy implementation of the max-tree kernels.

Fallback for :mod:`kronsgd._tree_core`; same signatures, same results
bit-for-bit (max propagation is exact arithmetic either way).  The heap
layout is shared with the compiled core: node 0 is the root, children of
node v are 2v+1 and 2v+2, leaf r of a tree with m_pad padded leaves lives
at node m_pad-1+r.
"""

import numpy as np

_NEG_INF = float("-inf")


def build(nodes: np.ndarray, scores: np.ndarray, m_pad: int) -> None:
    n, m = scores.shape
    base = m_pad - 1
    nodes[:, base : base + m] = scores
    if m_pad > m:
        nodes[:, base + m :] = _NEG_INF
    size = m_pad >> 1
    while size >= 1:
        idx = np.arange(size - 1, 2 * size - 1)
        nodes[:, idx] = np.maximum(nodes[:, 2 * idx + 1], nodes[:, 2 * idx + 2])
        size >>= 1


def update_leaf(nodes: np.ndarray, m_pad: int, i: int, r: int, delta: float) -> None:
    v = m_pad - 1 + r
    nodes[i, v] += delta
    while v > 0:
        v = (v - 1) >> 1
        left = 2 * v + 1
        nodes[i, v] = max(nodes[i, left], nodes[i, left + 1])


def apply_deltas(nodes: np.ndarray, m_pad: int, leaf_rs: np.ndarray, deltas: np.ndarray, levels) -> None:
    # leaf_rs must be unique; duplicated columns would collapse under fancy +=.
    cols = (m_pad - 1) + leaf_rs
    nodes[:, cols] += deltas
    for lvl in levels:
        nodes[:, lvl] = np.maximum(nodes[:, 2 * lvl + 1], nodes[:, 2 * lvl + 2])


def query(nodes: np.ndarray, m_pad: int, i: int, tau: float, out: np.ndarray, stack: np.ndarray):
    """Collect leaves with value > tau in ascending order; returns (count, visits)."""
    row = nodes[i]
    visits = 1
    if not row[0] > tau:
        return 0, visits
    base = m_pad - 1
    if base == 0:
        out[0] = 0
        return 1, visits
    stack[0] = 0
    sp = 1
    count = 0
    while sp:
        sp -= 1
        v = stack[sp]
        if v >= base:
            out[count] = v - base
            count += 1
            continue
        left = 2 * v + 1
        right = left + 1
        visits += 2
        # Right pushed first so the left subtree pops first -> ascending output.
        if row[right] > tau:
            stack[sp] = right
            sp += 1
        if row[left] > tau:
            stack[sp] = left
            sp += 1
    return count, visits
