import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from kronsgd.data import (
    KroneckerDataset,
    generate_synthetic,
    materialize_column,
    vectorize,
)
from kronsgd.kernels import (
    batch_inner,
    batch_inner_all,
    delta_dot,
    precompute_grams,
    scores_for_weight,
    scores_matrix,
)


def _raw_dataset(a_cols, b_cols):
    """Integer-valued factors: the un-normalized test mode."""
    a = np.array(a_cols, dtype=float).T
    b = np.array(b_cols, dtype=float).T
    return KroneckerDataset(A=a, B=b, y=np.zeros(a.shape[1]))


def test_scores_identity_weight_symmetric_column():
    ds = _raw_dataset([[1.0, 2.0]], [[1.0, 2.0]])
    got = scores_for_weight(ds, vectorize(np.eye(2)))
    assert got.tolist() == [5.0]  # x_bar^T x_bar


def test_scores_hand_example():
    ds = _raw_dataset([[1.0, 2.0]], [[1.0, 0.0]])
    w = np.array([1.0, 2.0, 3.0, 4.0])  # M = [[1, 3], [2, 4]] column-major
    got = scores_for_weight(ds, w)
    assert got.tolist() == [5.0]
    x = materialize_column(ds, 0)
    assert x.tolist() == [1.0, 2.0, 0.0, 0.0]
    assert float(x @ w) == 5.0


def test_scores_match_materialized_oracle(rng):
    ds = generate_synthetic(16, 3, 4, seed=12)
    w = rng.standard_normal(12)
    got = scores_for_weight(ds, w)
    for i in range(ds.n):
        want = float(materialize_column(ds, i) @ w)
        assert abs(got[i] - want) <= 1e-10 * (1.0 + abs(want))


def test_scores_matrix_rows_match_single(rng):
    ds = generate_synthetic(9, 2, 5, seed=4)
    weights = rng.standard_normal((6, 10))
    mat = scores_matrix(ds, weights)
    for k in range(6):
        single = scores_for_weight(ds, weights[k])
        assert np.allclose(mat[k], single, rtol=1e-12, atol=1e-14)


def test_scores_shape_validation():
    ds = generate_synthetic(4, 2, 3, seed=0)
    with pytest.raises(ValueError):
        scores_for_weight(ds, np.zeros(5))


def test_grams_orthonormal_columns():
    ds = _raw_dataset([[1.0, 0.0], [0.0, 1.0]], [[0.0, 1.0], [1.0, 0.0]])
    grams = precompute_grams(ds)
    assert np.array_equal(grams.ga, np.eye(2))
    assert np.array_equal(grams.gb, np.eye(2))


def test_grams_duplicate_columns():
    ds = _raw_dataset([[1.0], [1.0]], [[2.0], [2.0]])
    grams = precompute_grams(ds)
    assert np.array_equal(grams.ga, np.ones((2, 2)))
    assert np.array_equal(grams.gb, 4.0 * np.ones((2, 2)))


def test_grams_match_materialized_pairs():
    ds = generate_synthetic(8, 3, 3, seed=21)
    grams = precompute_grams(ds)
    cols = [materialize_column(ds, i) for i in range(8)]
    for i in range(8):
        for j in range(8):
            want = float(cols[i] @ cols[j])
            got = grams.ga[i, j] * grams.gb[i, j]
            assert abs(got - want) <= 1e-12 * (1.0 + abs(want))


def test_grams_exactly_symmetric_unit_diagonal():
    ds = generate_synthetic(12, 4, 5, seed=8)
    grams = precompute_grams(ds)
    assert np.array_equal(grams.ga, grams.ga.T)
    assert np.array_equal(grams.gb, grams.gb.T)
    assert np.abs(np.diag(grams.ga) - 1.0).max() <= 1e-12
    assert np.abs(np.diag(grams.gb) - 1.0).max() <= 1e-12


def test_batch_inner_hand_example():
    ds = _raw_dataset([[1.0, 2.0], [3.0, 1.0]], [[1.0, 0.0], [2.0, 1.0]])
    grams = precompute_grams(ds)
    got = batch_inner(grams, np.array([1]), 0)
    assert got.tolist() == [10.0]
    xi = materialize_column(ds, 0)
    xj = materialize_column(ds, 1)
    assert xi.tolist() == [1.0, 2.0, 0.0, 0.0]
    assert xj.tolist() == [6.0, 2.0, 3.0, 1.0]
    assert float(xi @ xj) == 10.0


def test_batch_inner_self_is_unit_norm():
    ds = generate_synthetic(6, 3, 2, seed=2)
    grams = precompute_grams(ds)
    for i in range(6):
        got = batch_inner(grams, np.array([i]), i)
        assert abs(got[0] - 1.0) <= 1e-12


def test_batch_inner_orthogonal_factor():
    ds = _raw_dataset([[1.0, 0.0], [0.0, 1.0]], [[5.0, 5.0], [5.0, 5.0]])
    grams = precompute_grams(ds)
    assert batch_inner(grams, np.array([1]), 0).tolist() == [0.0]


def test_batch_inner_index_validation():
    ds = generate_synthetic(4, 2, 2, seed=0)
    grams = precompute_grams(ds)
    with pytest.raises(IndexError):
        batch_inner(grams, np.array([4]), 0)
    with pytest.raises(IndexError):
        batch_inner(grams, np.array([0]), 4)
    with pytest.raises(IndexError):
        batch_inner(grams, np.array([-1]), 0)


def test_delta_dot_zero_coeffs():
    ds = generate_synthetic(5, 2, 2, seed=3)
    grams = precompute_grams(ds)
    assert delta_dot(grams, np.array([0, 2]), np.zeros(2), 1) == 0.0


def test_delta_dot_single_term():
    ds = generate_synthetic(5, 2, 3, seed=3)
    grams = precompute_grams(ds)
    got = delta_dot(grams, np.array([2]), np.array([1.5]), 4)
    assert got == pytest.approx(1.5 * grams.ga[2, 4] * grams.gb[2, 4], rel=1e-15)


def test_delta_dot_matches_materialized(rng):
    ds = generate_synthetic(10, 3, 3, seed=14)
    grams = precompute_grams(ds)
    idx = np.array([1, 3, 6, 8])
    coeffs = rng.standard_normal(4)
    delta = sum(c * materialize_column(ds, j) for c, j in zip(coeffs, idx))
    for i in range(10):
        want = float(delta @ materialize_column(ds, i))
        got = delta_dot(grams, idx, coeffs, i)
        assert abs(got - want) <= 1e-10 * (1.0 + abs(want))


def test_delta_dot_length_mismatch():
    ds = generate_synthetic(4, 2, 2, seed=1)
    grams = precompute_grams(ds)
    with pytest.raises(ValueError):
        delta_dot(grams, np.array([0, 1]), np.zeros(3), 0)


def test_batch_inner_all_rows(rng):
    ds = generate_synthetic(7, 2, 4, seed=6)
    grams = precompute_grams(ds)
    idx = np.array([0, 3, 5])
    mat = batch_inner_all(grams, idx)
    for k, j in enumerate(idx):
        for i in range(7):
            assert mat[k, i] == grams.ga[j, i] * grams.gb[j, i]


@given(seed=st.integers(0, 2**32 - 1))
@settings(max_examples=40, deadline=None)
def test_tensor_trick_identity(seed):
    rng = np.random.default_rng(seed)
    p = int(rng.integers(1, 9))
    q = int(rng.integers(1, 9))
    ds = generate_synthetic(5, p, q, seed=seed)
    m = rng.standard_normal((p, q))
    w = vectorize(m)
    scores = scores_for_weight(ds, w)
    for i in range(5):
        direct = float(ds.A[:, i] @ m @ ds.B[:, i])
        via_column = float(materialize_column(ds, i) @ w)
        assert abs(direct - via_column) <= 1e-10 * (1.0 + abs(direct))
        assert abs(scores[i] - direct) <= 1e-10 * (1.0 + abs(direct))


@given(seed=st.integers(0, 2**32 - 1), alpha=st.floats(-3, 3), beta=st.floats(-3, 3))
@settings(max_examples=40, deadline=None)
def test_delta_dot_bilinearity(seed, alpha, beta):
    rng = np.random.default_rng(seed)
    ds = generate_synthetic(6, 2, 3, seed=seed)
    grams = precompute_grams(ds)
    idx = np.array([0, 2, 4])
    c1 = rng.standard_normal(3)
    c2 = rng.standard_normal(3)
    i = int(rng.integers(6))
    combined = delta_dot(grams, idx, alpha * c1 + beta * c2, i)
    split = alpha * delta_dot(grams, idx, c1, i) + beta * delta_dot(grams, idx, c2, i)
    assert abs(combined - split) <= 1e-9 * (1.0 + abs(split))


class _CountingMatrix:
    """ndarray stand-in that counts how many elements are read."""

    def __init__(self, arr):
        self._arr = arr
        self.reads = 0

    def __getitem__(self, key):
        out = self._arr[key]
        self.reads += int(np.size(out))
        return out

    @property
    def shape(self):
        return self._arr.shape


class _CountingGrams:
    def __init__(self, grams):
        self.ga = _CountingMatrix(grams.ga)
        self.gb = _CountingMatrix(grams.gb)

    @property
    def n(self):
        return self.ga.shape[0]

    @property
    def reads(self):
        return self.ga.reads + self.gb.reads


def test_batch_ops_read_counts_independent_of_dims():
    """batch_inner/delta_dot touch exactly c*|S| Gram entries, with c the
    same for any (p, q): their cost has no dimension dependence."""
    reads = {}
    for p, q in ((2, 3), (16, 16)):
        ds = generate_synthetic(12, p, q, seed=5)
        counting = _CountingGrams(precompute_grams(ds))
        idx = np.array([0, 2, 5, 7])
        batch_inner(counting, idx, 3)
        delta_dot(counting, idx, np.ones(4), 9)
        reads[(p, q)] = counting.reads
    assert reads[(2, 3)] == reads[(16, 16)]


def test_batch_inner_reads_linear_in_batch_size():
    grams = precompute_grams(generate_synthetic(12, 2, 3, seed=5))
    counts = []
    for size in (4, 8):
        counting = _CountingGrams(grams)
        batch_inner(counting, np.arange(size), 3)
        counts.append(counting.reads)
    assert counts[1] == 2 * counts[0]
