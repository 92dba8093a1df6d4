import numpy as np
import pytest

from mmfprec.sparse import (
    MatrixMarketError,
    SparseSymMatrix,
    frobenius_norm,
    gram_columns,
    matvec,
    pow2_target_size,
    read_matrix_market,
    trim_to_pow2,
    write_matrix_market,
)


def test_matvec_identity():
    A = SparseSymMatrix(np.eye(3))
    assert np.array_equal(matvec(A, np.array([1.0, 2.0, 3.0])), [1.0, 2.0, 3.0])


def test_matvec_tridiag_row_sums():
    T = np.diag([-2.0] * 3) + np.diag([1.0] * 2, 1) + np.diag([1.0] * 2, -1)
    A = SparseSymMatrix(T)
    assert np.array_equal(matvec(A, np.ones(3)), [-1.0, 0.0, -1.0])


def test_matvec_matches_dense_oracle():
    rng = np.random.default_rng(7)
    B = rng.standard_normal((8, 8))
    D = B + B.T
    A = SparseSymMatrix(D)
    v = rng.standard_normal(8)
    assert np.linalg.norm(matvec(A, v) - D @ v) < 1e-14 * np.linalg.norm(D @ v)


def test_matvec_dense_oracle_sweep():
    rng = np.random.default_rng(3)
    for n in (2, 5, 17, 64):
        B = rng.standard_normal((n, n))
        D = B + B.T
        A = SparseSymMatrix(D)
        v = rng.standard_normal(n)
        ref = D @ v
        assert np.linalg.norm(matvec(A, v) - ref) <= 1e-13 * np.linalg.norm(ref)


def test_matvec_dimension_mismatch():
    A = SparseSymMatrix(np.eye(3))
    with pytest.raises(ValueError):
        matvec(A, np.ones(4))


def test_frobenius_norm():
    assert frobenius_norm(SparseSymMatrix(np.zeros((4, 4)))) == 0.0
    assert frobenius_norm(SparseSymMatrix(np.eye(4))) == 2.0
    rng = np.random.default_rng(11)
    B = rng.standard_normal((6, 6))
    D = B + B.T
    ref = np.linalg.norm(D, "fro")
    assert abs(frobenius_norm(SparseSymMatrix(D)) - ref) < 1e-14 * ref


def test_gram_columns_identity():
    A = SparseSymMatrix(np.eye(3))
    assert np.array_equal(gram_columns(A, [0, 1]), np.eye(2))


def test_gram_columns_parallel_columns():
    D = np.array([[2.0, 2.0, 0.0], [2.0, 2.0, 0.0], [0.0, 0.0, 1.0]])
    A = SparseSymMatrix(D)
    G = gram_columns(A, [0, 1])
    norm_sq = np.sum(D[:, 0] ** 2)
    assert np.allclose(G, norm_sq)


def test_gram_columns_dense_oracle():
    rng = np.random.default_rng(5)
    B = rng.standard_normal((10, 10))
    D = B + B.T
    A = SparseSymMatrix(D)
    cols = np.array([1, 3, 4, 8])
    ref = D[:, cols].T @ D[:, cols]
    assert np.max(np.abs(gram_columns(A, cols) - ref)) < 1e-13


def test_gram_columns_positive_semidefinite():
    rng = np.random.default_rng(19)
    for _ in range(5):
        B = rng.standard_normal((12, 12))
        A = SparseSymMatrix(B + B.T)
        cols = rng.choice(12, size=5, replace=False)
        lam = np.linalg.eigvalsh(gram_columns(A, np.sort(cols)))
        assert lam.min() > -1e-12


def test_symmetrization_exact():
    rng = np.random.default_rng(2)
    X = rng.standard_normal((9, 9))
    A = SparseSymMatrix(X)
    D = A.toarray()
    assert np.array_equal(D, D.T)


def test_pow2_target_size_examples():
    assert pow2_target_size(1024) == 1024
    assert pow2_target_size(1500) == 1024
    assert pow2_target_size(6144) == 4096


def test_pow2_target_size_arithmetic_sweep():
    # Pure arithmetic identity over a broad range, log2-rounding included.
    for n in list(range(2, 5000)) + [10**4, 10**5, 2**16, 2**16 - 1, 2**16 + 1]:
        s = n.bit_length() - 1
        p = n // 2**s
        assert pow2_target_size(n) == p * 2**s


def test_trim_to_pow2_sizes_and_order():
    rng = np.random.default_rng(0)
    B = rng.standard_normal((20, 20))
    A = SparseSymMatrix(B + B.T)
    sub, kept = trim_to_pow2(A, seed=42)
    assert sub.n == 16
    assert np.all(np.diff(kept) > 0)
    ref = A.toarray()[np.ix_(kept, kept)]
    assert np.array_equal(sub.toarray(), ref)


def test_trim_noop_at_power_of_two():
    A = SparseSymMatrix(np.eye(8))
    sub, kept = trim_to_pow2(A, seed=1)
    assert sub.n == 8
    assert np.array_equal(kept, np.arange(8))


def test_trim_deterministic():
    rng = np.random.default_rng(1)
    B = rng.standard_normal((33, 33))
    A = SparseSymMatrix(B + B.T)
    _, kept1 = trim_to_pow2(A, seed=9)
    _, kept2 = trim_to_pow2(A, seed=9)
    assert np.array_equal(kept1, kept2)


def test_read_matrix_market_mirrors_symmetric(tmp_path):
    path = tmp_path / "sym.mtx"
    path.write_text(
        "%%MatrixMarket matrix coordinate real symmetric\n"
        "2 2 3\n1 1 2.0\n2 1 1.0\n2 2 2.0\n")
    A = read_matrix_market(path)
    assert np.array_equal(A.toarray(), [[2.0, 1.0], [1.0, 2.0]])
    assert A.flags == ()


def test_read_matrix_market_missing_diagonal_stays_zero(tmp_path):
    path = tmp_path / "sym0.mtx"
    path.write_text(
        "%%MatrixMarket matrix coordinate real symmetric\n2 2 2\n1 1 2.0\n2 1 1.0\n")
    A = read_matrix_market(path)
    assert np.array_equal(A.toarray(), [[2.0, 1.0], [1.0, 0.0]])


def test_read_matrix_market_symmetrizes_general(tmp_path):
    path = tmp_path / "gen.mtx"
    path.write_text(
        "%%MatrixMarket matrix coordinate real general\n"
        "2 2 3\n1 1 2.0\n1 2 4.0\n2 1 0.0\n")
    A = read_matrix_market(path)
    assert "symmetrized-general" in A.flags
    assert np.array_equal(A.toarray(), [[2.0, 2.0], [2.0, 0.0]])


def test_read_matrix_market_rejects_pattern(tmp_path):
    path = tmp_path / "pat.mtx"
    path.write_text(
        "%%MatrixMarket matrix coordinate pattern symmetric\n2 2 1\n2 1\n")
    with pytest.raises(MatrixMarketError, match="non-real"):
        read_matrix_market(path)


def test_read_matrix_market_rejects_array_format(tmp_path):
    path = tmp_path / "arr.mtx"
    path.write_text("%%MatrixMarket matrix array real general\n2 2\n1\n2\n3\n4\n")
    with pytest.raises(MatrixMarketError):
        read_matrix_market(path)


def test_read_matrix_market_rejects_skew(tmp_path):
    path = tmp_path / "skew.mtx"
    path.write_text(
        "%%MatrixMarket matrix coordinate real skew-symmetric\n2 2 1\n2 1 1.0\n")
    with pytest.raises(MatrixMarketError):
        read_matrix_market(path)


def test_read_matrix_market_accepts_integer_field(tmp_path):
    path = tmp_path / "int.mtx"
    path.write_text(
        "%%MatrixMarket matrix coordinate integer symmetric\n2 2 2\n1 1 2\n2 2 3\n")
    A = read_matrix_market(path)
    assert np.array_equal(A.toarray(), [[2.0, 0.0], [0.0, 3.0]])


def test_trim_rejects_tiny():
    with pytest.raises(ValueError):
        trim_to_pow2(SparseSymMatrix(np.eye(1)), seed=0)


def test_matrix_market_round_trip_bit_identical(tmp_path):
    rng = np.random.default_rng(13)
    B = rng.standard_normal((7, 7))
    B[rng.random((7, 7)) < 0.5] = 0.0
    A = SparseSymMatrix(B + B.T)
    p1 = tmp_path / "a.mtx"
    p2 = tmp_path / "b.mtx"
    write_matrix_market(A, p1)
    A2 = read_matrix_market(p1)
    write_matrix_market(A2, p2)
    A3 = read_matrix_market(p2)
    assert np.array_equal(A2.toarray(), A.toarray())
    assert np.array_equal(A3.values, A2.values)
    assert np.array_equal(A3.col_indices, A2.col_indices)
