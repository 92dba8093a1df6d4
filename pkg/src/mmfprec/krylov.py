"""GMRES with pluggable left preconditioning and residual-history tracking.

Full (non-restarted) GMRES: Arnoldi with modified Gram-Schmidt and a
plane-rotation update of the Hessenberg least-squares problem. The solver
stops on the relative residual of the iterated (preconditioned) system; the
true relative residual of the original system is recomputed once at exit.
"""

import time
from dataclasses import dataclass

import numpy as np

from . import mmf as mmf_mod
from . import wspai
from .sparse import matvec
from .wavelets import forward

_BREAKDOWN_REL = 1e-14


@dataclass
class LinearOperator:
    """Deterministic linear map of a fixed dimension."""

    dimension: int
    apply: callable

    def __call__(self, v):
        return self.apply(v)


@dataclass
class SolveReport:
    converged: bool
    iterations: int
    residual_history: np.ndarray
    true_relative_residual: float
    setup_seconds: float = 0.0
    solve_seconds: float = 0.0
    flags: tuple = ()


def gmres(op, rhs, tol=1e-8, maxit=None, x0=None, restart=None):
    """Solve op(x) = rhs, returning the iterate and a solve report.

    ``op`` is a LinearOperator or any callable v -> op @ v. Residual
    history entries are relative to ||rhs|| with entry 0 the initial
    residual; the reported history equals the plane-rotation estimates,
    which match the exact iterated residuals up to roundoff.
    """
    apply_op = op.apply if isinstance(op, LinearOperator) else op
    rhs = np.asarray(rhs, dtype=np.float64)
    n = rhs.shape[0]
    if maxit is None:
        maxit = n
    if restart is not None and restart < maxit:
        return _gmres_restarted(apply_op, rhs, tol, maxit, x0, restart)
    if x0 is None:
        x0 = np.zeros(n)
    t0 = time.perf_counter()

    bnorm = np.linalg.norm(rhs)
    if bnorm == 0.0:
        report = SolveReport(True, 0, np.zeros(1), 0.0,
                             solve_seconds=time.perf_counter() - t0)
        return np.zeros(n), report

    r0 = rhs - apply_op(x0)
    beta = np.linalg.norm(r0)
    history = [beta / bnorm]
    flags = ()
    if history[0] <= tol:
        report = SolveReport(True, 0, np.array(history), history[0],
                             solve_seconds=time.perf_counter() - t0)
        return x0.copy(), report

    V = np.zeros((maxit + 1, n))
    V[0] = r0 / beta
    Hcol = np.zeros((maxit + 1, maxit))
    cs = np.zeros(maxit)
    sn = np.zeros(maxit)
    g = np.zeros(maxit + 1)
    g[0] = beta

    k = 0
    converged = False
    for k in range(maxit):
        # Copy: operators may return their input (e.g. the identity).
        w = np.array(apply_op(V[k]), dtype=np.float64)
        # Modified Gram-Schmidt against the current basis.
        for i in range(k + 1):
            Hcol[i, k] = V[i] @ w
            w -= Hcol[i, k] * V[i]
        hnext = np.linalg.norm(w)
        Hcol[k + 1, k] = hnext

        # Fold previous plane rotations into the new column.
        for i in range(k):
            t = cs[i] * Hcol[i, k] + sn[i] * Hcol[i + 1, k]
            Hcol[i + 1, k] = -sn[i] * Hcol[i, k] + cs[i] * Hcol[i + 1, k]
            Hcol[i, k] = t
        denom = np.hypot(Hcol[k, k], Hcol[k + 1, k])
        if denom == 0.0:
            flags += ("singular-hessenberg",)
            break
        cs[k] = Hcol[k, k] / denom
        sn[k] = Hcol[k + 1, k] / denom
        Hcol[k, k] = denom
        Hcol[k + 1, k] = 0.0
        g[k + 1] = -sn[k] * g[k]
        g[k] = cs[k] * g[k]

        history.append(abs(g[k + 1]) / bnorm)
        if history[-1] <= tol:
            converged = True
            k += 1
            break
        if hnext < _BREAKDOWN_REL * beta:
            # Krylov space is exhausted: the current iterate is exact up
            # to roundoff (lucky breakdown).
            flags += ("arnoldi-breakdown",)
            converged = history[-1] <= tol
            k += 1
            break
        V[k + 1] = w / hnext
    else:
        k = maxit

    y = np.zeros(k)
    for i in range(k - 1, -1, -1):
        y[i] = (g[i] - Hcol[i, i + 1:k] @ y[i + 1:k]) / Hcol[i, i]
    x = x0 + V[:k].T @ y

    history = np.array(history)
    true_rel = np.linalg.norm(rhs - apply_op(x)) / bnorm
    report = SolveReport(converged, k, history, true_rel,
                         solve_seconds=time.perf_counter() - t0, flags=flags)
    return x, report


def _gmres_restarted(apply_op, rhs, tol, maxit, x0, restart):
    """Optional restarted variant; off by default in every protocol."""
    n = rhs.shape[0]
    x = np.zeros(n) if x0 is None else x0.copy()
    history = None
    total = 0
    flags = ("restarted",)
    t0 = time.perf_counter()
    converged = False
    while total < maxit:
        cycle = min(restart, maxit - total)
        x, rep = gmres(apply_op, rhs, tol=tol, maxit=cycle, x0=x)
        seg = rep.residual_history if history is None else rep.residual_history[1:]
        history = seg if history is None else np.concatenate([history, seg])
        total += rep.iterations
        flags += rep.flags
        if rep.converged:
            converged = True
            break
        if rep.iterations == 0:
            break
    bnorm = np.linalg.norm(rhs)
    true_rel = np.linalg.norm(rhs - apply_op(x)) / bnorm if bnorm else 0.0
    report = SolveReport(converged, total, history, true_rel,
                         solve_seconds=time.perf_counter() - t0,
                         flags=tuple(dict.fromkeys(flags)))
    return x, report


PRECOND_KINDS = ("none", "ctw", "hc", "mmf")


def solve_preconditioned(A, b, precond="none", P=None, tol=1e-8, maxit=1000,
                         x0=None):
    """Solve A x = b through the iterated system of the chosen preconditioner.

    * none: plain GMRES on (A, b).
    * mmf / ctw: left preconditioning, operator v -> P(A v) with
      right-hand side P(b).
    * hc: left-transformed right-preconditioned system
      W.T A M y = W.T b with x = M y, whose iterated residual equals the
      true residual by orthogonality.

    The report's true_relative_residual is always recomputed on the
    original system.
    """
    b = np.asarray(b, dtype=np.float64)
    if precond not in PRECOND_KINDS:
        raise ValueError(f"unknown preconditioner {precond!r}")
    if precond != "none" and P is None:
        raise ValueError(f"preconditioner object required for {precond!r}")

    if precond == "none":
        op = LinearOperator(A.n, lambda v: matvec(A, v))
        rhs = b
        recover = lambda y: y
        pre_flags = ()
    elif precond == "mmf":
        op = LinearOperator(A.n, lambda v: mmf_mod.apply_inverse(P, matvec(A, v)))
        rhs = mmf_mod.apply_inverse(P, b)
        recover = lambda y: y
        pre_flags = P.flags + P.inverse_flags
    elif precond == "ctw":
        op = LinearOperator(A.n, lambda v: wspai.apply_ctw(P, matvec(A, v)))
        rhs = wspai.apply_ctw(P, b)
        recover = lambda y: y
        pre_flags = P.flags
    else:  # hc
        op = LinearOperator(A.n, lambda v: forward(P.basis, matvec(A, P.M @ v)))
        rhs = forward(P.basis, b)
        recover = lambda y: P.M @ y
        pre_flags = P.flags

    y, report = gmres(op, rhs, tol=tol, maxit=maxit, x0=x0)
    x = recover(y)
    bnorm = np.linalg.norm(b)
    true_rel = np.linalg.norm(b - matvec(A, x)) / bnorm if bnorm else 0.0
    flags = pre_flags + report.flags
    if report.converged and true_rel > 100.0 * tol:
        flags += ("true-residual-guard-exceeded",)
    report = SolveReport(report.converged, report.iterations,
                         report.residual_history, true_rel,
                         setup_seconds=report.setup_seconds,
                         solve_seconds=report.solve_seconds,
                         flags=tuple(dict.fromkeys(flags)))
    return x, report
