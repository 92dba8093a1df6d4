"""Sparse symmetric matrix storage and kernels.

Matrices are stored in CSR with both triangles present, which keeps column
extraction cheap (columns equal rows by symmetry). Construction symmetrizes
and drops explicit zeros; instances are immutable after construction and
safe to share across workers.
"""

import numpy as np
import scipy.sparse as sp


class MatrixMarketError(ValueError):
    """Raised for files this reader cannot ingest."""


class SparseSymMatrix:
    """Symmetric sparse matrix in CSR form with both triangles stored.

    Parameters
    ----------
    matrix : scipy sparse or dense array, square
        Input data. Symmetrized exactly as (A + A.T)/2 unless
        ``assume_symmetric`` is set, in which case the input is trusted
        (and verified cheaply in debug contexts by the test suite).
    flags : tuple of str
        Ingestion warnings carried along for reporting (e.g. a
        "general" Matrix Market header that had to be symmetrized).
    """

    __slots__ = ("csr", "flags")

    def __init__(self, matrix, assume_symmetric=False, flags=()):
        A = sp.csr_matrix(matrix, dtype=np.float64)
        if A.shape[0] != A.shape[1]:
            raise ValueError(f"matrix must be square, got {A.shape}")
        if A.shape[0] < 1:
            raise ValueError("matrix dimension must be >= 1")
        if not assume_symmetric:
            A = (A + A.T) * 0.5
        A = A.tocsr()
        A.sort_indices()
        A.eliminate_zeros()
        self.csr = A
        self.flags = tuple(flags)

    @property
    def n(self):
        return self.csr.shape[0]

    @property
    def nnz(self):
        return self.csr.nnz

    @property
    def row_starts(self):
        return self.csr.indptr

    @property
    def col_indices(self):
        return self.csr.indices

    @property
    def values(self):
        return self.csr.data

    def toarray(self):
        return self.csr.toarray()

    def __repr__(self):
        return f"SparseSymMatrix(n={self.n}, nnz={self.nnz})"


def matvec(A, v):
    """Compute A @ v with row-major, ascending-column accumulation."""
    v = np.asarray(v, dtype=np.float64)
    if v.shape != (A.n,):
        raise ValueError(f"dimension mismatch: matrix is {A.n}, vector is {v.shape}")
    return A.csr @ v


def frobenius_norm(A):
    """Frobenius norm, sqrt of the sum of squared stored values."""
    return float(np.sqrt(np.sum(A.csr.data ** 2)))


def gram_columns(A, cols):
    """Dense Gram block of pairwise column inner products <a_i, a_j>.

    ``cols`` is an ordered index set into [0, n). The result is
    len(cols) x len(cols), symmetric.
    """
    cols = np.asarray(cols, dtype=np.intp)
    B = A.csr.tocsc()[:, cols]
    return np.asarray((B.T @ B).todense())


def pow2_target_size(n):
    """Target size p * 2**s with s = floor(log2 n), p = floor(n / 2**s)."""
    if n < 1:
        raise ValueError("n must be >= 1")
    s = int(np.floor(np.log2(n)))
    # Guard against log2 rounding at exact powers of two.
    while 2 ** (s + 1) <= n:
        s += 1
    while 2 ** s > n:
        s -= 1
    p = n // (2 ** s)
    return p * 2 ** s


def trim_to_pow2(A, seed):
    """Discard a seeded random index set so the matrix has p * 2**s rows/cols.

    Returns the principal submatrix and the kept indices (original order).
    Needed before dyadic wavelet transforms can be applied to off-the-shelf
    matrices.
    """
    if A.n < 2:
        raise ValueError("trim requires n >= 2")
    target = pow2_target_size(A.n)
    rng = np.random.default_rng(seed)
    if target == A.n:
        kept = np.arange(A.n)
    else:
        drop = rng.choice(A.n, size=A.n - target, replace=False)
        mask = np.ones(A.n, dtype=bool)
        mask[drop] = False
        kept = np.flatnonzero(mask)
    sub = A.csr[kept][:, kept]
    return SparseSymMatrix(sub, assume_symmetric=True, flags=A.flags), kept


def _parse_mm_header(line):
    parts = line.strip().split()
    if len(parts) != 5 or parts[0] != "%%MatrixMarket" or parts[1].lower() != "matrix":
        raise MatrixMarketError(f"malformed Matrix Market header: {line.strip()!r}")
    return parts[2].lower(), parts[3].lower(), parts[4].lower()


def read_matrix_market(path):
    """Read a coordinate-format real Matrix Market file as a symmetric matrix.

    "symmetric" headers have the missing triangle mirrored. "general"
    headers are symmetrized as (A + A.T)/2 and the result carries a
    ``symmetrized-general`` flag. "skew-symmetric", pattern and complex
    fields are rejected.
    """
    with open(path) as fh:
        header = fh.readline()
    fmt, field, symmetry = _parse_mm_header(header)
    if fmt != "coordinate":
        raise MatrixMarketError(f"unsupported format {fmt!r}; coordinate required")
    if field not in ("real", "integer"):
        raise MatrixMarketError(f"non-real field {field!r}")
    if symmetry not in ("symmetric", "general"):
        raise MatrixMarketError(f"unsupported symmetry {symmetry!r}")

    from scipy.io import mmread

    coo = mmread(path).tocoo()
    if coo.shape[0] != coo.shape[1]:
        raise MatrixMarketError(f"matrix is not square: {coo.shape}")
    n = coo.shape[0]
    if coo.nnz and (coo.row.max() >= n or coo.col.max() >= n):
        raise MatrixMarketError("index out of bounds")

    if symmetry == "symmetric":
        # mmread already mirrored the stored triangle.
        return SparseSymMatrix(coo, assume_symmetric=True)
    return SparseSymMatrix(coo, flags=("symmetrized-general",))


def write_matrix_market(A, path):
    """Write in coordinate/real/symmetric form with round-trip-exact values.

    Only the lower triangle is stored; values use 17 significant digits so a
    read-write-read cycle reproduces bit-identical floats.
    """
    coo = sp.tril(A.csr).tocoo()
    with open(path, "w") as fh:
        fh.write("%%MatrixMarket matrix coordinate real symmetric\n")
        fh.write(f"{A.n} {A.n} {coo.nnz}\n")
        for i, j, v in zip(coo.row, coo.col, coo.data):
            fh.write(f"{i + 1} {j + 1} {v:.17g}\n")
