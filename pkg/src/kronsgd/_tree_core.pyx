# cython: language_level=3
"""Compiled max-tree kernels: bank build, incremental leaf updates with
ancestor recomputation, and threshold reporting with visit counting.

Layout matches kronsgd._tree_py: heap order, root at node 0, children of v
at 2v+1 / 2v+2, leaf r at node m_pad-1+r, padding leaves hold -inf.
"""

import numpy as np

cimport cython
from libc.math cimport INFINITY


def build(double[:, ::1] nodes, double[:, ::1] scores, Py_ssize_t m_pad):
    cdef Py_ssize_t n = scores.shape[0]
    cdef Py_ssize_t m = scores.shape[1]
    cdef Py_ssize_t base = m_pad - 1
    cdef Py_ssize_t i, r, v
    cdef double left, right
    for i in range(n):
        for r in range(m):
            nodes[i, base + r] = scores[i, r]
        for r in range(m, m_pad):
            nodes[i, base + r] = -INFINITY
        for v in range(base - 1, -1, -1):
            left = nodes[i, 2 * v + 1]
            right = nodes[i, 2 * v + 2]
            nodes[i, v] = left if left >= right else right


def update_leaf(double[:, ::1] nodes, Py_ssize_t m_pad, Py_ssize_t i, Py_ssize_t r, double delta):
    cdef Py_ssize_t v = m_pad - 1 + r
    cdef double left, right
    nodes[i, v] += delta
    while v > 0:
        v = (v - 1) >> 1
        left = nodes[i, 2 * v + 1]
        right = nodes[i, 2 * v + 2]
        nodes[i, v] = left if left >= right else right


def apply_deltas(double[:, ::1] nodes, Py_ssize_t m_pad, long long[::1] leaf_rs,
                 double[:, ::1] deltas, levels):
    # levels: list of int64 arrays of ancestor node ids, bottom level first;
    # flattened here so the per-tree loop is a single pass (children of any
    # frontier node are finalized before the node itself is recomputed).
    cdef long long[::1] frontier
    if levels:
        frontier = np.concatenate(levels)
    else:
        frontier = np.empty(0, dtype=np.int64)
    cdef Py_ssize_t n = nodes.shape[0]
    cdef Py_ssize_t nleaf = leaf_rs.shape[0]
    cdef Py_ssize_t nfront = frontier.shape[0]
    cdef Py_ssize_t base = m_pad - 1
    cdef Py_ssize_t i, k
    cdef long long v
    cdef double left, right
    for i in range(n):
        for k in range(nleaf):
            nodes[i, base + leaf_rs[k]] += deltas[i, k]
        for k in range(nfront):
            v = frontier[k]
            left = nodes[i, 2 * v + 1]
            right = nodes[i, 2 * v + 2]
            nodes[i, v] = left if left >= right else right


def query(double[:, ::1] nodes, Py_ssize_t m_pad, Py_ssize_t i, double tau,
          long long[::1] out, long long[::1] stack):
    """Collect leaves with value > tau in ascending order; returns (count, visits)."""
    cdef Py_ssize_t base = m_pad - 1
    cdef Py_ssize_t sp, count
    cdef long long v, left, right
    cdef long long visits = 1
    if not nodes[i, 0] > tau:
        return 0, 1
    if base == 0:
        out[0] = 0
        return 1, 1
    stack[0] = 0
    sp = 1
    count = 0
    while sp > 0:
        sp -= 1
        v = stack[sp]
        if v >= base:
            out[count] = v - base
            count += 1
            continue
        left = 2 * v + 1
        right = left + 1
        visits += 2
        if nodes[i, right] > tau:
            stack[sp] = right
            sp += 1
        if nodes[i, left] > tau:
            stack[sp] = left
            sp += 1
    return count, visits
