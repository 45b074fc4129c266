"""Bank of per-data-point binary max-trees over neuron scores.

One tree per data point; leaf (i, r) stores the running inner product of
weight vector r with data point i.  Internal nodes store the max of their
two children, which supports reporting every leaf above a threshold in
O(|result| * log m) node visits and incremental leaf updates in O(log m).

A compiled core (``kronsgd._tree_core``) is used when available; a
pure-NumPy fallback with identical semantics is selected otherwise or when
``KRON_SGD_BACKEND=python`` is set.  ``benchmarks/backend_compare.py``
measures the two against each other.

Note on updates: internal nodes are always recomputed as the max of their
two children.  Folding the updated leaf into the parent via
``parent = max(parent, leaf)`` would leave stale maxima behind whenever a
leaf decreases, and gradient steps decrease inner products all the time.
"""

from __future__ import annotations

import os

import numpy as np

from . import _tree_py

try:
    from . import _tree_core

    HAVE_COMPILED = True
except ImportError:  # pragma: no cover - depends on build environment
    _tree_core = None
    HAVE_COMPILED = False

_BACKENDS = {"python": _tree_py}
if HAVE_COMPILED:
    _BACKENDS["compiled"] = _tree_core


def default_backend() -> str:
    env = os.environ.get("KRON_SGD_BACKEND", "").strip().lower()
    if env in _BACKENDS:
        return env
    if env and env != "auto":
        raise ValueError(f"KRON_SGD_BACKEND={env!r} is not one of {sorted(_BACKENDS)}")
    return "compiled" if HAVE_COMPILED else "python"


class TreeBank:
    """n complete binary max-trees with m leaves each, flat heap layout."""

    def __init__(self, scores: np.ndarray, backend: str | None = None):
        scores = np.ascontiguousarray(scores, dtype=np.float64)
        if scores.ndim != 2 or scores.shape[0] < 1 or scores.shape[1] < 1:
            raise ValueError("scores must be a non-empty 2-d matrix (n x m)")
        if not np.all(np.isfinite(scores)):
            raise ValueError("scores must be finite")
        self.n, self.m = scores.shape
        self.m_pad = 1 << (self.m - 1).bit_length()
        self.backend = backend or default_backend()
        if self.backend not in _BACKENDS:
            raise ValueError(f"unknown backend {self.backend!r}; have {sorted(_BACKENDS)}")
        self._core = _BACKENDS[self.backend]
        self.nodes = np.empty((self.n, 2 * self.m_pad - 1))
        self._core.build(self.nodes, scores, self.m_pad)
        depth = self.m_pad.bit_length()  # levels including the leaf level
        self._qout = np.empty(self.m, dtype=np.int64)
        self._qstack = np.empty(2 * depth + 4, dtype=np.int64)

    # -- reads ---------------------------------------------------------------

    def leaf_value(self, i: int, r: int) -> float:
        self._check_point(i)
        self._check_leaf(r)
        return float(self.nodes[i, self.m_pad - 1 + r])

    def leaf_values(self, i: int, rs: np.ndarray) -> np.ndarray:
        """Leaf values for the (already validated) index array ``rs``."""
        return self.nodes[i, self.m_pad - 1 + rs]

    def leaf_row(self, i: int) -> np.ndarray:
        self._check_point(i)
        return self.nodes[i, self.m_pad - 1 : self.m_pad - 1 + self.m].copy()

    def leaf_matrix(self) -> np.ndarray:
        """All leaf values as an n x m matrix (diagnostics)."""
        return self.nodes[:, self.m_pad - 1 : self.m_pad - 1 + self.m].copy()

    def root_value(self, i: int) -> float:
        self._check_point(i)
        return float(self.nodes[i, 0])

    # -- updates -------------------------------------------------------------

    def update_leaf_delta(self, i: int, r: int, delta: float) -> None:
        """Add ``delta`` to leaf (i, r) and recompute the ancestor maxima."""
        self._check_point(i)
        self._check_leaf(r)
        delta = float(delta)
        if not np.isfinite(delta):
            raise ValueError("delta must be finite")
        self._core.update_leaf(self.nodes, self.m_pad, i, r, delta)

    def apply_deltas(self, leaf_rs: np.ndarray, deltas: np.ndarray) -> None:
        """Add deltas[i, k] to leaf (i, leaf_rs[k]) in every tree i at once.

        ``leaf_rs`` must be strictly increasing (hence unique).  Ancestors
        shared between updated leaves are recomputed once per level.
        """
        leaf_rs = np.ascontiguousarray(leaf_rs, dtype=np.int64)
        deltas = np.ascontiguousarray(deltas, dtype=np.float64)
        if leaf_rs.ndim != 1 or deltas.shape != (self.n, leaf_rs.size):
            raise ValueError("deltas must have shape (n, len(leaf_rs))")
        if leaf_rs.size == 0:
            return
        if leaf_rs[0] < 0 or leaf_rs[-1] >= self.m:
            raise IndexError("leaf index out of range")
        if leaf_rs.size > 1 and not np.all(np.diff(leaf_rs) > 0):
            raise ValueError("leaf_rs must be strictly increasing")
        self._core.apply_deltas(
            self.nodes, self.m_pad, leaf_rs, deltas, self._ancestor_levels(leaf_rs)
        )

    def _ancestor_levels(self, leaf_rs: np.ndarray) -> list[np.ndarray]:
        levels = []
        cur = (self.m_pad - 1) + leaf_rs
        while cur.size and cur[0] > 0:
            cur = np.unique((cur - 1) >> 1)
            levels.append(cur)
        return levels

    # -- queries -------------------------------------------------------------

    def query(self, i: int, tau: float) -> np.ndarray:
        """Ascending indices r with leaf value strictly above tau."""
        return self.query_stats(i, tau)[0]

    def query_stats(self, i: int, tau: float) -> tuple[np.ndarray, int]:
        """Like :meth:`query` but also reports the number of node visits."""
        self._check_point(i)
        count, visits = self._core.query(
            self.nodes, self.m_pad, i, float(tau), self._qout, self._qstack
        )
        return self._qout[:count].copy(), int(visits)

    # -- verification helpers --------------------------------------------------

    def heap_ok(self) -> bool:
        """True iff every internal node equals the max of its children and
        every padding leaf is still -inf."""
        base = self.m_pad - 1
        if base > 0:
            v = np.arange(base)
            internal = self.nodes[:, v]
            expect = np.maximum(self.nodes[:, 2 * v + 1], self.nodes[:, 2 * v + 2])
            if not np.array_equal(internal, expect):
                return False
        if self.m_pad > self.m:
            if not np.all(np.isneginf(self.nodes[:, base + self.m :])):
                return False
        return True

    def _check_point(self, i: int) -> None:
        if not 0 <= i < self.n:
            raise IndexError(f"tree index {i} out of range [0, {self.n})")

    def _check_leaf(self, r: int) -> None:
        if not 0 <= r < self.m:
            raise IndexError(f"leaf index {r} out of range [0, {self.m})")


def build_bank(scores: np.ndarray, backend: str | None = None) -> TreeBank:
    """Build a bank from an n x m score matrix (row i = scores of point i)."""
    return TreeBank(scores, backend=backend)
