"""Shared oracles for the test suite, independent of the library paths."""

import numpy as np

from mmfprec.sparse import SparseSymMatrix


def random_spd(n, rng, shift=None):
    """Dense random SPD matrix with a safe diagonal shift."""
    B = rng.standard_normal((n, n))
    A = B @ B.T
    A += (shift if shift is not None else n) * np.eye(n)
    return A


def random_sparse_spd(n, rng, density=0.05, shift=None):
    """Sparse random SPD matrix as a SparseSymMatrix."""
    mask = rng.random((n, n)) < density
    B = np.where(mask, rng.standard_normal((n, n)), 0.0)
    A = B @ B.T + (shift if shift is not None else n * density * 4 + 1) * np.eye(n)
    A[np.abs(A) < 1e-12] = 0.0
    return SparseSymMatrix(A)


def compose_q(factorization):
    """Dense composite rotation Q = Q_L ... Q_1 built directly from the list."""
    n = factorization.n
    Q = np.eye(n)
    for rot in factorization.rotations:
        R = np.eye(n)
        R[np.ix_(rot.indices, rot.indices)] = rot.block
        Q = R @ Q
    return Q


def dense_h(factorization):
    """Dense core-diagonal matrix assembled from the factorization fields."""
    n = factorization.n
    H = factorization.H
    out = np.zeros((n, n))
    if len(H.core_indices):
        out[np.ix_(H.core_indices, H.core_indices)] = H.core
    out[H.diag_indices, H.diag_indices] = H.diagonal
    return out


def reconstruction_error_sq(A_dense, factorization):
    """Frobenius error of A - Q.T H Q, squared (dense oracle)."""
    Q = compose_q(factorization)
    H = dense_h(factorization)
    return np.linalg.norm(A_dense - Q.T @ H @ Q, "fro") ** 2


def dense_analysis_matrix(basis):
    """Dense W.T from explicitly multiplied stage factors (1D oracle)."""
    n = basis.signal_length_per_dim
    WT = np.eye(n)
    for k in range(1, basis.levels + 1):
        WT = basis.factor(k).T.toarray() @ WT
    return WT


def kron_analysis_matrix(basis):
    """Dense nd analysis operator via explicit Kronecker products."""
    WT = dense_analysis_matrix(basis)
    out = WT
    for _ in range(basis.dims - 1):
        out = np.kron(out, WT)
    return out
