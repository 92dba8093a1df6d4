"""Daubechies filter banks and factored fast wavelet transforms.

The L-level transform of a length-n signal factors into sparse orthogonal
stages: stage k applies a stride-2 circulant filter pair to the leading
n/2**(k-1) entries and leaves the rest alone, so analysis and synthesis
never materialize the dense transform matrix. Scaling coefficients end up
in the leading n/2**L slots, followed by detail bands coarsest to finest.

Higher-dimensional transforms apply the full 1D transform along each axis
of the column-stacked signal in turn.
"""

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

def _daubechies_filter(p):
    """Orthonormal Daubechies scaling filter with p vanishing moments.

    Spectral factorization: the roots of the binomial polynomial
    P(y) = sum_k C(p-1+k, k) y^k are mapped to z-plane roots inside the
    unit circle, and h(z) = sqrt(2) ((1+z)/2)^p prod (z - z_i)/(1 - z_i).
    Root polishing keeps the filter identities near machine precision.
    """
    if p == 1:
        return np.array([1.0, 1.0]) / np.sqrt(2.0)
    coeffs = [math.comb(p - 1 + k, k) for k in range(p)]
    yroots = np.roots(coeffs[::-1])
    poly = np.array([1.0])
    for y in yroots:
        # z^2 - (2 - 4y) z + 1 = 0; keep the root inside the unit circle.
        b = 2.0 - 4.0 * y
        disc = np.sqrt(b * b - 4.0 + 0j)
        z = (b - disc) / 2.0
        if abs(z) > 1.0:
            z = (b + disc) / 2.0
        for _ in range(3):  # Newton polish on z^2 - b z + 1
            z -= (z * z - b * z + 1.0) / (2.0 * z - b)
        poly = np.convolve(poly, [1.0, -z]) / (1.0 - z)
    for _ in range(p):
        poly = np.convolve(poly, [0.5, 0.5])
    h = np.real(poly) * np.sqrt(2.0)
    return h / np.linalg.norm(h)


# Orthonormal scaling filters by tap count, sum(h) = sqrt(2), sum(h^2) = 1.
FILTER_BANKS = {taps: _daubechies_filter(taps // 2) for taps in (2, 4, 6, 8)}


def qmf(h):
    """Quadrature-mirror counterpart g_k = (-1)**k * h[m-1-k]."""
    m = len(h)
    return np.array([(-1.0) ** k * h[m - 1 - k] for k in range(m)])


def max_levels(length, taps):
    """Deepest usable level: each active block must stay even and >= taps."""
    levels = 0
    width = length
    while width % 2 == 0 and width >= taps:
        levels += 1
        width //= 2
    return levels


def _stride2_circulant(taps, width):
    """Half-width stride-2 circulant block with circular wrap rows."""
    half = width // 2
    m = len(taps)
    rows = np.repeat(np.arange(half), m)
    cols = (2 * np.arange(half)[:, None] + np.arange(m)[None, :]).ravel() % width
    data = np.tile(taps, half)
    return sp.csr_matrix((data, (rows, cols)), shape=(half, width))


@dataclass
class WaveletBasis:
    """Daubechies filter pair with a level count and signal dimensionality.

    Parameters
    ----------
    signal_length_per_dim : int
        Length n of the signal along each axis; stage k needs n/2**(k-1)
        even, so the usable depth is capped by the dyadic structure of n.
    taps : int
        Filter length, one of 2 (Haar), 4, 6, 8.
    levels : int
        Requested transform depth; clamped to the usable maximum with a
        ``levels-clamped`` flag.
    dims : int
        1, 2 or 3; higher dimensions transform axis by axis.
    """

    signal_length_per_dim: int
    taps: int = 4
    levels: int = 8
    dims: int = 1
    flags: tuple = ()
    h: np.ndarray = field(init=False, repr=False)
    g: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        if self.dims not in (1, 2, 3):
            raise ValueError("dims must be 1, 2 or 3")
        if self.taps not in FILTER_BANKS:
            raise ValueError(f"taps must be one of {sorted(FILTER_BANKS)}")
        if self.signal_length_per_dim < 1:
            raise ValueError("signal length must be >= 1")
        self.h = FILTER_BANKS[self.taps].copy()
        self.g = qmf(self.h)
        if abs(self.h @ self.h - 1.0) > 1e-12:
            raise ValueError("filter taps are not orthonormal")
        for t in range(1, self.taps // 2):
            if abs(self.h[: -2 * t] @ self.h[2 * t :]) > 1e-12:
                raise ValueError("filter taps violate double-shift orthogonality")
        cap = max_levels(self.signal_length_per_dim, self.taps)
        if self.levels > cap:
            self.levels = cap
            self.flags = self.flags + ("levels-clamped",)
        if self.levels < 0:
            raise ValueError("levels must be >= 0")
        # Active-block analysis operators [U_k; V_k], one per level.
        self._blocks = []
        width = self.signal_length_per_dim
        for _ in range(self.levels):
            U = _stride2_circulant(self.h, width)
            V = _stride2_circulant(self.g, width)
            self._blocks.append(sp.vstack([U, V]).tocsr())
            width //= 2

    @property
    def n(self):
        """Total signal length, (per-dim length)**dims."""
        return self.signal_length_per_dim**self.dims

    def factor(self, k):
        """Sparse orthogonal stage factor W_k of the 1D transform.

        W_k.T carries the [U_k; V_k] block over the leading active slice and
        an identity on the trailing n - n/2**(k-1) coordinates.
        """
        if not 1 <= k <= self.levels:
            raise ValueError(f"level k={k} outside 1..{self.levels}")
        n = self.signal_length_per_dim
        width = n >> (k - 1)
        WkT = sp.block_diag(
            [self._blocks[k - 1], sp.identity(n - width, format="csr")],
            format="csr",
        )
        return WkT.T.tocsr()

    def _forward_1d(self, y):
        # y is (n,) or (n, r); the active slice shrinks by half per level.
        width = self.signal_length_per_dim
        for block in self._blocks:
            y[:width] = block @ y[:width]
            width //= 2
        return y

    def _inverse_1d(self, y):
        width = self.signal_length_per_dim >> max(self.levels - 1, 0)
        for block in reversed(self._blocks):
            y[:width] = block.T @ y[:width]
            width *= 2
        return y


def _check_length(basis, x):
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (basis.n,):
        raise ValueError(f"length mismatch: expected {basis.n}, got {x.shape}")
    return x


def forward(basis, x):
    """Analysis transform W.T x applied factor by factor.

    For dims > 1 the 1D transform runs along each axis of the
    column-stacked signal.
    """
    x = _check_length(basis, x)
    if basis.dims == 1:
        return basis._forward_1d(x.copy())
    m = basis.signal_length_per_dim
    X = x.reshape((m,) * basis.dims, order="F").copy()
    for axis in range(basis.dims):
        Y = np.moveaxis(X, axis, 0).reshape(m, -1)
        Y = np.ascontiguousarray(Y)
        basis._forward_1d(Y)
        X = np.moveaxis(Y.reshape((m,) * basis.dims), 0, axis)
    return X.reshape(-1, order="F")


def inverse(basis, y):
    """Synthesis transform W y, the exact inverse of :func:`forward`."""
    y = _check_length(basis, y)
    if basis.dims == 1:
        return basis._inverse_1d(y.copy())
    m = basis.signal_length_per_dim
    X = y.reshape((m,) * basis.dims, order="F").copy()
    for axis in range(basis.dims):
        Y = np.moveaxis(X, axis, 0).reshape(m, -1)
        Y = np.ascontiguousarray(Y)
        basis._inverse_1d(Y)
        X = np.moveaxis(Y.reshape((m,) * basis.dims), 0, axis)
    return X.reshape(-1, order="F")


# nd aliases; forward/inverse already dispatch on basis.dims.
forward_nd = forward
inverse_nd = inverse


def column_support(basis, j):
    """Sparsity pattern of column j of the dense synthesis matrix.

    Propagates a unit indicator through the synthesis factors structurally
    (absolute values, no cancellation).
    """
    if not 0 <= j < basis.n:
        raise ValueError(f"column {j} outside [0, {basis.n})")
    m = basis.signal_length_per_dim
    abs_blocks = [abs(b) for b in basis._blocks]
    ind = np.zeros(basis.n)
    ind[j] = 1.0

    def prop_1d(y):
        width = m >> max(basis.levels - 1, 0)
        for block in reversed(abs_blocks):
            y[:width] = block.T @ y[:width]
            width *= 2
        return y

    if basis.dims == 1:
        out = prop_1d(ind)
    else:
        X = ind.reshape((m,) * basis.dims, order="F").copy()
        for axis in range(basis.dims):
            Y = np.ascontiguousarray(np.moveaxis(X, axis, 0).reshape(m, -1))
            prop_1d(Y)
            X = np.moveaxis(Y.reshape((m,) * basis.dims), 0, axis)
        out = X.reshape(-1, order="F")
    return np.flatnonzero(out > 0.0)


def analysis_sparse(basis):
    """Full sparse analysis operator W.T (Kronecker product across dims)."""
    n = basis.signal_length_per_dim
    WT = sp.identity(n, format="csr")
    for k in range(1, basis.levels + 1):
        WT = basis.factor(k).T @ WT
    WT = WT.tocsr()
    out = WT
    for _ in range(basis.dims - 1):
        out = sp.kron(out, WT, format="csr")
    return out


def structure_sparse(basis):
    """Structural (absolute-value) analysis operator for pattern queries."""
    n = basis.signal_length_per_dim
    WT = sp.identity(n, format="csr")
    for k in range(1, basis.levels + 1):
        WT = abs(basis.factor(k).T) @ WT
    WT = WT.tocsr()
    out = WT
    for _ in range(basis.dims - 1):
        out = sp.kron(out, WT, format="csr")
    return out
