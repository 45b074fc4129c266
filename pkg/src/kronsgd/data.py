"""Kronecker-structured datasets and the column-stacking vectorization ops.

A dataset stores two factor matrices A (p x n) and B (q x n); the implicit
data matrix X (d x n, d = p*q) has columns x_i = b_i (x) a_i = vec(a_i b_i^T)
and is never materialized by the training path.  Column-major vectorization
is fixed package-wide so this identity holds with no transposes.

Synthetic data normalizes both factor columns to unit length, hence
||x_i||_2 = ||a_i||_2 * ||b_i||_2 = 1.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .seeding import substream

_HEADER_PREFIX = "kron-dataset v1"
_SIG_DIGITS = 17


class DatasetFormatError(ValueError):
    """Raised when a dataset file cannot be parsed; message names the line."""


def vectorize(m: np.ndarray) -> np.ndarray:
    """Stack the columns of a matrix into one vector (column-major)."""
    m = np.asarray(m, dtype=np.float64)
    if m.ndim != 2:
        raise ValueError(f"expected a 2-d matrix, got ndim={m.ndim}")
    return np.ravel(m, order="F")


def unvectorize(v: np.ndarray, rows: int, cols: int) -> np.ndarray:
    """Inverse of :func:`vectorize`: rebuild a rows x cols matrix."""
    v = np.asarray(v, dtype=np.float64)
    if v.ndim != 1:
        raise ValueError(f"expected a 1-d vector, got ndim={v.ndim}")
    if rows < 1 or cols < 1:
        raise ValueError("rows and cols must be positive")
    if v.size != rows * cols:
        raise ValueError(f"length {v.size} does not match {rows}x{cols}={rows * cols}")
    return np.reshape(v, (rows, cols), order="F")


@dataclass
class KroneckerDataset:
    """Factor matrices A (p x n), B (q x n) and labels y (n,).

    ``symmetric=True`` asserts p == q and A == B, i.e. each implicit column
    is vec(v v^T) for the shared factor column v.
    """

    A: np.ndarray
    B: np.ndarray
    y: np.ndarray
    symmetric: bool = False
    n: int = field(init=False)
    p: int = field(init=False)
    q: int = field(init=False)

    def __post_init__(self):
        self.A = np.ascontiguousarray(self.A, dtype=np.float64)
        self.B = np.ascontiguousarray(self.B, dtype=np.float64)
        self.y = np.ascontiguousarray(self.y, dtype=np.float64)
        if self.A.ndim != 2 or self.B.ndim != 2 or self.y.ndim != 1:
            raise ValueError("A and B must be 2-d, y must be 1-d")
        self.p, n_a = self.A.shape
        self.q, n_b = self.B.shape
        if n_a != n_b or n_a != self.y.size:
            raise ValueError(f"sample counts disagree: A has {n_a}, B has {n_b}, y has {self.y.size}")
        self.n = n_a
        if self.n < 1 or self.p < 1 or self.q < 1:
            raise ValueError("n, p, q must all be >= 1")
        for name, arr in (("A", self.A), ("B", self.B), ("y", self.y)):
            if not np.all(np.isfinite(arr)):
                raise ValueError(f"{name} contains non-finite entries")
        if self.symmetric:
            if self.p != self.q:
                raise ValueError(f"symmetric dataset requires p == q, got p={self.p}, q={self.q}")
            if not np.array_equal(self.A, self.B):
                raise ValueError("symmetric dataset requires A == B element-for-element")

    @property
    def d(self) -> int:
        return self.p * self.q


def materialize_column(ds: KroneckerDataset, i: int) -> np.ndarray:
    """Dense column x_i = b_i (x) a_i = vec(a_i b_i^T), length p*q."""
    if not 0 <= i < ds.n:
        raise IndexError(f"column index {i} out of range [0, {ds.n})")
    return vectorize(np.outer(ds.A[:, i], ds.B[:, i]))


def materialize_matrix(ds: KroneckerDataset) -> np.ndarray:
    """All columns stacked as a dense d x n matrix (test/oracle use only)."""
    out = np.empty((ds.d, ds.n))
    for i in range(ds.n):
        out[:, i] = materialize_column(ds, i)
    return out


def generate_synthetic(
    n: int,
    p: int,
    q: int,
    seed: int,
    label_scale: float = 1.0,
    symmetric: bool = False,
) -> KroneckerDataset:
    """Random dataset with unit-norm factor columns and uniform labels.

    Factor columns are i.i.d. standard normal rescaled to unit 2-norm, so
    every implicit column has unit norm.  Labels are uniform in
    [-label_scale, label_scale].  Deterministic given the seed.
    """
    if n < 1 or p < 1 or q < 1:
        raise ValueError("n, p, q must all be >= 1")
    if symmetric and p != q:
        raise ValueError(f"symmetric generation requires p == q, got p={p}, q={q}")
    rng = substream(seed, "data")
    a = _unit_columns(rng.standard_normal((p, n)), rng)
    if symmetric:
        b = a.copy()
    else:
        b = _unit_columns(rng.standard_normal((q, n)), rng)
    y = rng.uniform(-label_scale, label_scale, size=n)
    return KroneckerDataset(A=a, B=b, y=y, symmetric=symmetric)


def _unit_columns(f: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    norms = np.linalg.norm(f, axis=0)
    # A zero column has probability zero; redraw keeps the contract airtight.
    while np.any(norms == 0.0):
        bad = norms == 0.0
        f[:, bad] = rng.standard_normal((f.shape[0], int(bad.sum())))
        norms = np.linalg.norm(f, axis=0)
    return f / norms


def save_dataset(ds: KroneckerDataset, path) -> None:
    """Write the text format; 17 significant digits round-trip float64 exactly."""
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(
            f"{_HEADER_PREFIX} n={ds.n} p={ds.p} q={ds.q} symmetric={1 if ds.symmetric else 0}\n"
        )
        for i in range(ds.n):
            fields = [f"{v:.{_SIG_DIGITS}g}" for v in ds.A[:, i]]
            fields += [f"{v:.{_SIG_DIGITS}g}" for v in ds.B[:, i]]
            fields.append(f"{ds.y[i]:.{_SIG_DIGITS}g}")
            fh.write(" ".join(fields) + "\n")


def load_dataset(path) -> KroneckerDataset:
    """Parse the text format written by :func:`save_dataset`.

    Raises :class:`DatasetFormatError` naming the offending line on any
    malformed header, wrong field count, or non-finite value.
    """
    with open(path, "r", encoding="utf-8") as fh:
        lines = fh.read().split("\n")
    # A trailing newline leaves one empty string at the end; drop it.
    if lines and lines[-1] == "":
        lines.pop()
    if not lines:
        raise DatasetFormatError("line 1: empty file")
    n, p, q, symmetric = _parse_header(lines[0])
    expected_fields = p + q + 1
    if len(lines) != n + 1:
        # Name the first line that is missing or unexpected.
        bad_line = min(len(lines), n + 1) + 1
        raise DatasetFormatError(
            f"line {bad_line}: expected {n} data lines after the header, found {len(lines) - 1}"
        )
    a = np.empty((p, n))
    b = np.empty((q, n))
    y = np.empty(n)
    for i in range(n):
        lineno = i + 2
        parts = lines[i + 1].split()
        if len(parts) != expected_fields:
            raise DatasetFormatError(
                f"line {lineno}: expected {expected_fields} fields, found {len(parts)}"
            )
        try:
            values = [float(tok) for tok in parts]
        except ValueError as exc:
            raise DatasetFormatError(f"line {lineno}: {exc}") from None
        if not all(math.isfinite(v) for v in values):
            raise DatasetFormatError(f"line {lineno}: non-finite value")
        a[:, i] = values[:p]
        b[:, i] = values[p : p + q]
        y[i] = values[-1]
    try:
        return KroneckerDataset(A=a, B=b, y=y, symmetric=symmetric)
    except ValueError as exc:
        raise DatasetFormatError(f"line 1: {exc}") from None


def _parse_header(line: str):
    tokens = line.split()
    prefix = _HEADER_PREFIX.split()
    if tokens[: len(prefix)] != prefix or len(tokens) != len(prefix) + 4:
        raise DatasetFormatError(f"line 1: malformed header {line!r}")
    values = {}
    for token, key in zip(tokens[len(prefix) :], ("n", "p", "q", "symmetric")):
        name, _, raw = token.partition("=")
        if name != key:
            raise DatasetFormatError(f"line 1: expected field {key}=..., found {token!r}")
        try:
            values[key] = int(raw)
        except ValueError:
            raise DatasetFormatError(f"line 1: non-integer value in {token!r}") from None
    if values["n"] < 1 or values["p"] < 1 or values["q"] < 1:
        raise DatasetFormatError("line 1: n, p, q must all be >= 1")
    if values["symmetric"] not in (0, 1):
        raise DatasetFormatError("line 1: symmetric must be 0 or 1")
    if values["symmetric"] == 1 and values["p"] != values["q"]:
        raise DatasetFormatError("line 1: symmetric=1 requires p == q")
    return values["n"], values["p"], values["q"], bool(values["symmetric"])
