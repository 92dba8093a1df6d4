import numpy as np
import pytest

from helpers import kron_analysis_matrix, random_spd
from mmfprec.sparse import SparseSymMatrix
from mmfprec.wavelets import WaveletBasis, column_support
from mmfprec.wspai import (
    apply_ctw,
    apply_hc,
    build_ctw,
    build_hc,
    dyadic_block_sizes,
)


def test_ctw_identity_matrix():
    basis = WaveletBasis(16, taps=2, levels=2)
    A = SparseSymMatrix(np.eye(16))
    for block_size in (None, 4, 16):
        P = build_ctw(A, basis, block_size)
        assert np.linalg.norm(P.M_tilde.toarray() - np.eye(16), "fro") < 1e-12


def test_ctw_full_block_is_unconstrained_inverse():
    rng = np.random.default_rng(1)
    n = 16
    basis = WaveletBasis(n, taps=2, levels=1)
    A = SparseSymMatrix(np.diag(rng.uniform(1.0, 4.0, n)))
    P = build_ctw(A, basis, block_size=n)
    WT = kron_analysis_matrix(basis)
    At = WT @ A.toarray() @ WT.T
    assert np.max(np.abs(P.M_tilde.toarray() - np.linalg.inv(At))) < 1e-10


def test_ctw_residual_non_increasing_in_block_size():
    rng = np.random.default_rng(32)
    n = 32
    A = SparseSymMatrix(random_spd(n, rng))
    basis = WaveletBasis(n, taps=2, levels=3)
    WT = kron_analysis_matrix(basis)
    At = WT @ A.toarray() @ WT.T
    residuals = []
    for bs in (1, 2, 4, 8, 16, 32):
        P = build_ctw(A, basis, block_size=bs)
        residuals.append(np.linalg.norm(At @ P.M_tilde.toarray() - np.eye(n), "fro"))
    assert all(a >= b - 1e-10 for a, b in zip(residuals, residuals[1:]))


def test_ctw_default_blocks_are_dyadic_bands():
    assert dyadic_block_sizes(16, 2) == (4, 4, 8)
    assert dyadic_block_sizes(8, 3) == (1, 1, 2, 4)
    assert dyadic_block_sizes(8, 0) == (8,)
    basis = WaveletBasis(16, taps=2, levels=2)
    P = build_ctw(SparseSymMatrix(np.eye(16)), basis)
    assert P.block_sizes == (4, 4, 8)
    assert sum(P.block_sizes) == 16


def test_ctw_block_structure_enforced():
    rng = np.random.default_rng(9)
    A = SparseSymMatrix(random_spd(16, rng))
    basis = WaveletBasis(16, taps=2, levels=2)
    P = build_ctw(A, basis, block_size=4)
    M = P.M_tilde.toarray()
    for i in range(16):
        for j in range(16):
            if i // 4 != j // 4:
                assert M[i, j] == 0.0


def test_apply_ctw_identity_and_linearity():
    rng = np.random.default_rng(3)
    basis = WaveletBasis(16, taps=4, levels=2)
    A = SparseSymMatrix(np.eye(16))
    P = build_ctw(A, basis)
    r = rng.standard_normal(16)
    assert np.linalg.norm(apply_ctw(P, r) - r) < 1e-10
    r2 = rng.standard_normal(16)
    lhs = apply_ctw(P, 2.0 * r - 3.0 * r2)
    rhs = 2.0 * apply_ctw(P, r) - 3.0 * apply_ctw(P, r2)
    assert np.linalg.norm(lhs - rhs) < 1e-12 * max(np.linalg.norm(rhs), 1.0)


def test_ctw_preconditioned_condition_number():
    rng = np.random.default_rng(14)
    n = 16
    A = SparseSymMatrix(random_spd(n, rng, shift=4.0))
    basis = WaveletBasis(n, taps=2, levels=2)
    P = build_ctw(A, basis)
    M_eff = np.column_stack([apply_ctw(P, e) for e in np.eye(n)])
    s_pre = np.linalg.svd(M_eff @ A.toarray(), compute_uv=False)
    s_a = np.linalg.svd(A.toarray(), compute_uv=False)
    assert s_pre[0] / s_pre[-1] <= s_a[0] / s_a[-1] * (1.0 + 1e-9)


def test_hc_identity_matrix_exact():
    for taps, n, L in ((2, 16, 2), (4, 16, 1)):
        basis = WaveletBasis(n, taps=taps, levels=L)
        A = SparseSymMatrix(np.eye(n))
        P = build_hc(A, basis)
        WT = kron_analysis_matrix(basis)
        res = np.linalg.norm(WT @ P.M.toarray() - np.eye(n), "fro")
        assert res < 1e-10
        r = np.random.default_rng(0).standard_normal(n)
        assert np.linalg.norm(apply_hc(P, r) - r) < 1e-10


def test_hc_scaling():
    basis = WaveletBasis(8, taps=2, levels=2)
    P1 = build_hc(SparseSymMatrix(np.eye(8)), basis)
    Pc = build_hc(SparseSymMatrix(4.0 * np.eye(8)), basis)
    assert np.max(np.abs(Pc.M.toarray() - P1.M.toarray() / 4.0)) < 1e-12


def test_hc_pattern_containment():
    rng = np.random.default_rng(6)
    n = 32
    A = SparseSymMatrix(random_spd(n, rng))
    basis = WaveletBasis(n, taps=4, levels=3)
    P = build_hc(A, basis)
    M = P.M.tocsc()
    for j in range(n):
        sup = set(column_support(basis, j))
        stored = set(M.indices[M.indptr[j]:M.indptr[j + 1]])
        assert stored <= sup


def test_hc_matches_dense_pattern_restricted_lsq():
    rng = np.random.default_rng(17)
    n = 32
    A = SparseSymMatrix(random_spd(n, rng))
    basis = WaveletBasis(n, taps=2, levels=3)
    P = build_hc(A, basis)
    Z = kron_analysis_matrix(basis) @ A.toarray()
    M = P.M.toarray()
    for j in range(n):
        J = column_support(basis, j)
        z, *_ = np.linalg.lstsq(Z[:, J], np.eye(n)[:, j], rcond=None)
        assert np.max(np.abs(M[J, j] - z)) < 1e-10


def test_hc_least_squares_optimality():
    # residual of each column orthogonal to the span of its selected columns
    rng = np.random.default_rng(23)
    n = 64
    A = SparseSymMatrix(random_spd(n, rng))
    basis = WaveletBasis(n, taps=4, levels=2)
    P = build_hc(A, basis)
    Z = kron_analysis_matrix(basis) @ A.toarray()
    M = P.M.toarray()
    R = Z @ M - np.eye(n)
    for j in range(n):
        J = column_support(basis, j)
        proj = Z[:, J].T @ R[:, j]
        assert np.max(np.abs(proj)) < 1e-10 * max(np.linalg.norm(Z[:, J]), 1.0)


def test_hc_richer_pattern_beats_diagonal_and_shallow():
    rng = np.random.default_rng(64)
    n = 64
    A = SparseSymMatrix(random_spd(n, rng))
    b3 = WaveletBasis(n, taps=2, levels=3)
    b1 = WaveletBasis(n, taps=2, levels=1)
    P3 = build_hc(A, b3)
    P1 = build_hc(A, b1)
    Z3 = kron_analysis_matrix(b3) @ A.toarray()
    Z1 = kron_analysis_matrix(b1) @ A.toarray()
    res3 = np.linalg.norm(Z3 @ P3.M.toarray() - np.eye(n), "fro")
    res1 = np.linalg.norm(Z1 @ P1.M.toarray() - np.eye(n), "fro")
    # best diagonal fit against the L=3 operator
    diag = np.array([Z3[:, j] @ np.eye(n)[:, j] / (Z3[:, j] @ Z3[:, j])
                     for j in range(n)])
    res_diag = np.linalg.norm(Z3 @ np.diag(diag) - np.eye(n), "fro")
    assert res3 < res_diag
    assert res3 < res1


def test_hc_2d_basis():
    rng = np.random.default_rng(40)
    basis = WaveletBasis(4, taps=2, levels=1, dims=2)
    A = SparseSymMatrix(random_spd(16, rng))
    P = build_hc(A, basis)
    Z = kron_analysis_matrix(basis) @ A.toarray()
    M = P.M.toarray()
    for j in range(16):
        J = column_support(basis, j)
        z, *_ = np.linalg.lstsq(Z[:, J], np.eye(16)[:, j], rcond=None)
        assert np.max(np.abs(M[J, j] - z)) < 1e-10


def test_apply_hc_linearity():
    rng = np.random.default_rng(5)
    basis = WaveletBasis(16, taps=2, levels=2)
    A = SparseSymMatrix(random_spd(16, rng))
    P = build_hc(A, basis)
    r1, r2 = rng.standard_normal(16), rng.standard_normal(16)
    lhs = apply_hc(P, 0.5 * r1 + 2.0 * r2)
    rhs = 0.5 * apply_hc(P, r1) + 2.0 * apply_hc(P, r2)
    assert np.linalg.norm(lhs - rhs) < 1e-12 * max(np.linalg.norm(rhs), 1.0)


def test_builders_reject_size_mismatch():
    basis = WaveletBasis(8, taps=2, levels=1)
    A = SparseSymMatrix(np.eye(16))
    with pytest.raises(ValueError):
        build_ctw(A, basis)
    with pytest.raises(ValueError):
        build_hc(A, basis)


def test_build_hc_never_materializes_dense_product():
    import tracemalloc

    from mmfprec.problems import build_lap1d

    n = 4096
    prob = build_lap1d(n)
    basis = WaveletBasis(n, taps=4, levels=4)
    tracemalloc.start()
    build_hc(prob.matrix, basis)
    _, peak = tracemalloc.get_traced_memory()
    tracemalloc.stop()
    # a single dense n x n double array would be 128 MiB
    assert peak < 60 * 2**20
