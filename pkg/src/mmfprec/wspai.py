"""Wavelet sparse-approximate-inverse preconditioners.

Two classical constructions around an orthogonal wavelet basis W (analysis
transform W.T applied via sparse factors):

* block-diagonal: transform the matrix into the wavelet basis,
  At = W.T A W, and fit a block-diagonal approximate inverse Mt by
  independent per-block least squares. Application is
  r -> W (Mt (W.T r)).
* implicit: never transform the matrix; fit M with the column sparsity
  pattern of W by per-column least squares against W.T A, so the
  preconditioned iteration runs on (W.T A M) y = W.T b with x = M y.

Per-column problems are independent; rank-deficient local systems fall
back to a minimum-norm solution and raise a flag.
"""

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp

from . import wavelets
from .sparse import SparseSymMatrix
from .wavelets import WaveletBasis, forward, inverse

_RANK_TOL = 1e-12


@dataclass
class CtwPreconditioner:
    basis: WaveletBasis
    block_sizes: tuple
    M_tilde: sp.csr_matrix
    flags: tuple = ()


@dataclass
class HcPreconditioner:
    basis: WaveletBasis
    M: sp.csc_matrix
    flags: tuple = ()


def _solve_lsq(D, rhs):
    """min ||D z - rhs|| via column-pivoted reduced QR (LAPACK gelsy).

    Rank deficiency is judged against 1e-12 times the leading R diagonal;
    deficient systems get the minimum-norm solution and are flagged.
    """
    if D.shape[1] == 0:
        shape = (0,) if rhs.ndim == 1 else (0, rhs.shape[1])
        return np.zeros(shape), False
    z, _res, rank, _sv = sla.lstsq(D, rhs, cond=_RANK_TOL,
                                   lapack_driver="gelsy")
    return z, rank < D.shape[1]


def dyadic_block_sizes(n, levels):
    """Default block partition: scaling block then doubling detail bands."""
    if levels <= 0:
        return (n,)
    sizes = [n >> levels]
    for k in range(levels, 0, -1):
        sizes.append(n >> k)
    return tuple(sizes)


def _block_partition(n, basis, block_size):
    if block_size is not None:
        if block_size < 1:
            raise ValueError("block_size must be >= 1")
        bounds = list(range(0, n, block_size)) + [n]
        return tuple(b - a for a, b in zip(bounds[:-1], bounds[1:]))
    return dyadic_block_sizes(n, basis.levels * basis.dims)


def build_ctw(A, basis, block_size=None):
    """Block-diagonal approximate inverse in the wavelet basis.

    The transformed matrix is assembled with sparse factor products; each
    diagonal block solves its least-squares fit against the corresponding
    identity columns via reduced QR.
    """
    if not isinstance(A, SparseSymMatrix):
        A = SparseSymMatrix(A)
    if A.n != basis.n:
        raise ValueError(f"matrix size {A.n} incompatible with basis size {basis.n}")
    n = A.n
    WT = wavelets.analysis_sparse(basis)
    At = (WT @ A.csr @ WT.T).tocsc()

    sizes = _block_partition(n, basis, block_size)
    flags = ()
    blocks = []
    start = 0
    for size in sizes:
        cols = np.arange(start, start + size)
        D = np.asarray(At[:, cols].todense())
        rhs = np.zeros((n, size))
        rhs[cols, np.arange(size)] = 1.0
        z, deficient = _solve_lsq(D, rhs)
        if deficient:
            flags += ("ctw-rank-deficient-block",)
        blocks.append(z)
        start += size
    M_tilde = sp.block_diag(blocks, format="csr")
    return CtwPreconditioner(basis, sizes, M_tilde, flags)


def apply_ctw(P, r):
    """Approximate-inverse application W (Mt (W.T r)) via factored transforms."""
    r = np.asarray(r, dtype=np.float64)
    if r.shape != (P.basis.n,):
        raise ValueError(f"dimension mismatch: expected {P.basis.n}, got {r.shape}")
    return inverse(P.basis, P.M_tilde @ forward(P.basis, r))


def _hc_column(Z, pattern, j):
    J = pattern.indices[pattern.indptr[j]:pattern.indptr[j + 1]]
    S = Z[:, J]
    I = np.unique(S.tocoo().row)
    if I.size == 0:
        return J, np.zeros(len(J)), False
    D = np.asarray(S[I, :].todense())
    rhs = (I == j).astype(np.float64)
    z, deficient = _solve_lsq(D, rhs)
    return J, z, deficient


def build_hc(A, basis, workers=None):
    """Implicit wavelet approximate inverse with the sparsity pattern of W.

    For each column j the pattern is the support of the j-th wavelet
    synthesis column; the local least-squares problem uses the rows of
    W.T A carrying nonzeros in those columns and is solved by reduced QR.
    The transformed matrix is held as a sparse factor product, never dense.
    Columns are independent and may be solved on worker threads; results
    are assembled by column index, so worker count never changes them.
    """
    if not isinstance(A, SparseSymMatrix):
        A = SparseSymMatrix(A)
    if A.n != basis.n:
        raise ValueError(f"matrix size {A.n} incompatible with basis size {basis.n}")
    if workers is None:
        workers = int(os.environ.get("MMFPREC_WORKERS", "1"))
    n = A.n
    WT = wavelets.analysis_sparse(basis)
    Z = (WT @ A.csr).tocsc()
    pattern = wavelets.structure_sparse(basis).tocsr()
    pattern.sort_indices()

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(lambda j: _hc_column(Z, pattern, j),
                                    range(n)))
    else:
        results = [_hc_column(Z, pattern, j) for j in range(n)]

    flags = set()
    data, rows, cols = [], [], []
    for j, (J, z, deficient) in enumerate(results):
        if deficient:
            flags.add("hc-rank-deficient-column")
        rows.extend(J)
        cols.extend([j] * len(J))
        data.extend(z)
    M = sp.csc_matrix((data, (rows, cols)), shape=(n, n))
    return HcPreconditioner(basis, M, tuple(sorted(flags)))


def apply_hc(P, r):
    """Effective approximate-inverse application M (W.T r).

    The solver composes the implicit preconditioner as the pair
    (v -> W.T A M v, W.T b) with x = M y; this operator is the matching
    approximate inverse M W.T.
    """
    r = np.asarray(r, dtype=np.float64)
    if r.shape != (P.basis.n,):
        raise ValueError(f"dimension mismatch: expected {P.basis.n}, got {r.shape}")
    return P.M @ forward(P.basis, r)
