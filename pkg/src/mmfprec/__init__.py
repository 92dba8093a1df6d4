"""Multiresolution matrix factorization preconditioning for symmetric systems.

Library layout:

* :mod:`mmfprec.sparse` - symmetric CSR storage, kernels, Matrix Market I/O
* :mod:`mmfprec.problems` - finite-difference model PDE problems
* :mod:`mmfprec.wavelets` - Daubechies filter banks and factored transforms
* :mod:`mmfprec.wspai` - wavelet sparse-approximate-inverse preconditioners
* :mod:`mmfprec.mmf` - greedy and staged multiresolution factorization
* :mod:`mmfprec.krylov` - GMRES and preconditioned solves
* :mod:`mmfprec.bench` - experiment protocol, tables, figures, CLI
"""

from .krylov import LinearOperator, SolveReport, gmres, solve_preconditioned
from .mmf import (
    MMFFactorization,
    PmmfConfig,
    apply_factored,
    apply_inverse,
    greedy_mmf,
    load_factorization,
    pmmf,
    save_factorization,
)
from .problems import build_problem
from .sparse import (
    SparseSymMatrix,
    frobenius_norm,
    gram_columns,
    matvec,
    read_matrix_market,
    trim_to_pow2,
)
from .wavelets import WaveletBasis, column_support, forward, inverse
from .wspai import apply_ctw, apply_hc, build_ctw, build_hc

__version__ = "0.1.0"

__all__ = [
    "LinearOperator",
    "MMFFactorization",
    "PmmfConfig",
    "SolveReport",
    "SparseSymMatrix",
    "WaveletBasis",
    "apply_ctw",
    "apply_factored",
    "apply_hc",
    "apply_inverse",
    "build_ctw",
    "build_hc",
    "build_problem",
    "column_support",
    "forward",
    "frobenius_norm",
    "gmres",
    "gram_columns",
    "greedy_mmf",
    "inverse",
    "load_factorization",
    "matvec",
    "pmmf",
    "read_matrix_market",
    "save_factorization",
    "solve_preconditioned",
    "trim_to_pow2",
]
