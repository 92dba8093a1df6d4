"""Finite-difference discretizations of the four model PDE problems.

All problems live on the unit interval/square/cube with homogeneous
Dirichlet boundaries and a regular mesh of m interior points per dimension,
h = 1/(m+1). Matrices are the literal central-difference operators
(negative definite for the Laplacians); callers may negate both sides,
which leaves GMRES iteration counts unchanged.
"""

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .sparse import SparseSymMatrix

PROBLEM_KINDS = ("lap1d", "lap2d", "lap3d", "disc2d")


@dataclass(frozen=True)
class ModelProblem:
    kind: str
    m: int
    matrix: SparseSymMatrix
    rhs: np.ndarray

    @property
    def n(self):
        return self.matrix.n

    @property
    def dims(self):
        return {"lap1d": 1, "lap2d": 2, "lap3d": 3, "disc2d": 2}[self.kind]


def _lap1d_operator(m, h):
    main = np.full(m, -2.0 / h**2)
    off = np.full(m - 1, 1.0 / h**2)
    return sp.diags([off, main, off], [-1, 0, 1], format="csr")


def build_lap1d(m):
    """u_xx = (1+x^2)^{-1} e^x on (0,1), central differences."""
    if m < 1:
        raise ValueError("m must be >= 1")
    h = 1.0 / (m + 1)
    x = h * np.arange(1, m + 1)
    A = _lap1d_operator(m, h)
    rhs = np.exp(x) / (1.0 + x**2)
    return ModelProblem("lap1d", m, SparseSymMatrix(A, assume_symmetric=True), rhs)


def build_lap2d(m):
    """u_xx + u_yy = -100 x^2 on the unit square, five-point stencil.

    Unknowns are ordered lexicographically with x fastest: node (i, j)
    maps to index j*m + i.
    """
    if m < 1:
        raise ValueError("m must be >= 1")
    h = 1.0 / (m + 1)
    T = _lap1d_operator(m, h)
    eye = sp.identity(m, format="csr")
    # Kronecker sum: x-direction block acts within rows, y across them.
    A = sp.kron(eye, T) + sp.kron(T, eye)
    x = h * np.arange(1, m + 1)
    X = np.tile(x, m)  # x fastest
    rhs = -100.0 * X**2
    return ModelProblem("lap2d", m, SparseSymMatrix(A, assume_symmetric=True), rhs)


def build_lap3d(m):
    """u_xx + u_yy + u_zz = -100 x^2 on the unit cube, seven-point stencil."""
    if m < 1:
        raise ValueError("m must be >= 1")
    h = 1.0 / (m + 1)
    T = _lap1d_operator(m, h)
    eye = sp.identity(m, format="csr")
    A = (
        sp.kron(sp.kron(eye, eye), T)
        + sp.kron(sp.kron(eye, T), eye)
        + sp.kron(sp.kron(T, eye), eye)
    )
    x = h * np.arange(1, m + 1)
    X = np.tile(x, m * m)
    rhs = -100.0 * X**2
    return ModelProblem("lap3d", m, SparseSymMatrix(A, assume_symmetric=True), rhs)


def disc_coefficient(x, y):
    """Piecewise diffusion coefficient of the discontinuous-coefficient PDE.

    First matching case wins on the region boundary lines.
    """
    if 0.0 <= x <= 0.5 and 0.5 <= y <= 1.0:
        return 1e-3
    if 0.5 <= x <= 1.0 and 0.0 <= y <= 0.5:
        return 1e3
    return 1.0


def build_disc2d(m):
    """(a u_x)_x + (b u_y)_y = sin(pi x y) with a = b piecewise 1e-3/1e3/1.

    Flux coefficients are evaluated pointwise at edge midpoints, so the
    edge value is shared by both adjacent rows and the matrix is
    symmetric exactly.
    """
    if m < 1:
        raise ValueError("m must be >= 1")
    h = 1.0 / (m + 1)
    n = m * m
    coords = h * np.arange(1, m + 1)

    rows, cols, vals = [], [], []
    scale = 1.0 / h**2
    for j in range(m):
        y = coords[j]
        for i in range(m):
            x = coords[i]
            idx = j * m + i
            a_w = disc_coefficient(x - 0.5 * h, y)
            a_e = disc_coefficient(x + 0.5 * h, y)
            b_s = disc_coefficient(x, y - 0.5 * h)
            b_n = disc_coefficient(x, y + 0.5 * h)
            diag = -(a_w + a_e + b_s + b_n) * scale
            rows.append(idx)
            cols.append(idx)
            vals.append(diag)
            if i > 0:
                rows.append(idx)
                cols.append(idx - 1)
                vals.append(a_w * scale)
            if i < m - 1:
                rows.append(idx)
                cols.append(idx + 1)
                vals.append(a_e * scale)
            if j > 0:
                rows.append(idx)
                cols.append(idx - m)
                vals.append(b_s * scale)
            if j < m - 1:
                rows.append(idx)
                cols.append(idx + m)
                vals.append(b_n * scale)

    A = sp.coo_matrix((vals, (rows, cols)), shape=(n, n)).tocsr()
    X = np.tile(coords, m)
    Y = np.repeat(coords, m)
    rhs = np.sin(np.pi * X * Y)
    return ModelProblem("disc2d", m, SparseSymMatrix(A, assume_symmetric=True), rhs)


_BUILDERS = {
    "lap1d": build_lap1d,
    "lap2d": build_lap2d,
    "lap3d": build_lap3d,
    "disc2d": build_disc2d,
}


def build_problem(kind, m):
    """Build a model problem by name; m is the interior point count per dim."""
    try:
        builder = _BUILDERS[kind]
    except KeyError:
        raise ValueError(f"unknown problem kind {kind!r}; choose from {PROBLEM_KINDS}")
    return builder(m)
