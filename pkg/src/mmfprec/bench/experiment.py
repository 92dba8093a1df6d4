"""Experiment protocol: matrix selection, preconditioner sweep, tables.

A single experiment loads or builds one symmetric matrix, draws a seeded
standard-normal right-hand side, then builds and times each selected
preconditioner and solves with GMRES, recording one result row and one
residual-history CSV per method. Off-the-shelf matrices are trimmed to
p * 2**s rows/columns when a wavelet preconditioner participates, so the
dyadic transform applies; model problems use a wavelet transform of the
same dimension as the underlying PDE.
"""

import os
import time
from dataclasses import dataclass, replace

import numpy as np

from .. import mmf as mmf_mod
from .. import wspai
from ..krylov import solve_preconditioned
from ..problems import PROBLEM_KINDS, build_problem
from ..sparse import read_matrix_market, trim_to_pow2
from ..wavelets import WaveletBasis

WAVELET_METHODS = ("ctw", "hc")
METHOD_ORDER = ("none", "ctw", "hc", "mmf")


@dataclass(frozen=True)
class Protocol:
    """Parameter bundle for one family of runs."""

    name: str
    tol: float
    maxit: int
    levels: int
    preconditioners: tuple
    trim: bool

    def wavelet_dims(self, kind=None):
        """Transform dimensionality: the PDE's for model problems, else 1."""
        if self.name == "model" and kind is not None:
            return {"lap1d": 1, "lap2d": 2, "lap3d": 3, "disc2d": 2}[kind]
        return 1


def default_protocols():
    """The two experiment protocols: model PDEs and off-the-shelf matrices."""
    model = Protocol("model", tol=1e-8, maxit=1000, levels=8,
                     preconditioners=("none", "ctw", "hc", "mmf"), trim=False)
    ufl = Protocol("ufl", tol=1e-4, maxit=500, levels=8,
                   preconditioners=("none", "hc", "mmf"), trim=True)
    return model, ufl


@dataclass
class ExperimentConfig:
    problem: str = None
    m: int = None
    matrix_path: str = None
    preconditioners: tuple = None
    tol: float = None
    maxit: int = None
    taps: int = 4
    levels: int = 8
    block_size: int = None
    target_core: int = 100
    max_block: int = 2000
    wavelet_fraction: float = 0.5
    rhs_seed: int = 0
    trim_seed: int = 0
    out_dir: str = "bench-out"
    figures: bool = True
    workers: int = None

    def __post_init__(self):
        if (self.problem is None) == (self.matrix_path is None):
            raise ValueError("exactly one of problem/matrix_path is required")
        if self.problem is not None and self.problem not in PROBLEM_KINDS:
            raise ValueError(f"unknown problem kind {self.problem!r}")
        if self.problem is not None and (self.m is None or self.m < 1):
            raise ValueError("model problems need m >= 1")
        proto = default_protocols()[0 if self.problem else 1]
        if self.preconditioners is None:
            self.preconditioners = proto.preconditioners
        self.preconditioners = tuple(self.preconditioners)
        for p in self.preconditioners:
            if p not in METHOD_ORDER:
                raise ValueError(f"unknown preconditioner {p!r}")
        if self.tol is None:
            self.tol = proto.tol
        if self.maxit is None:
            self.maxit = proto.maxit
        if self.tol <= 0 or self.maxit < 1:
            raise ValueError("tol must be positive and maxit >= 1")

    @property
    def dataset(self):
        if self.problem:
            return f"{self.problem}-m{self.m}"
        stem = os.path.basename(self.matrix_path)
        return stem[:-4] if stem.endswith(".mtx") else stem


@dataclass
class ResultRow:
    dataset: str
    n: int
    nnz: int
    method: str
    converged: bool
    iterations: int
    maxit: int
    setup_seconds: float
    solve_seconds: float
    true_relative_residual: float
    flags: tuple = ()
    shown: bool = True
    best: bool = False

    @property
    def total_seconds(self):
        return self.setup_seconds + self.solve_seconds

    @property
    def dnc(self):
        return not self.converged


def _load_source(config):
    """Returns (matrix, rhs-length dims info): matrix, per_dim, dims, flags."""
    if config.problem:
        prob = build_problem(config.problem, config.m)
        return prob.matrix, config.m, prob.dims, ()
    A = read_matrix_market(config.matrix_path)
    flags = A.flags
    if any(p in WAVELET_METHODS for p in config.preconditioners):
        A, _kept = trim_to_pow2(A, config.trim_seed)
        flags += ("trimmed",)
    return A, A.n, 1, flags


def _build_preconditioner(method, A, basis, config):
    if method == "none":
        return None
    if method == "ctw":
        return wspai.build_ctw(A, basis, config.block_size)
    if method == "hc":
        return wspai.build_hc(A, basis)
    cfg = mmf_mod.PmmfConfig(
        wavelet_fraction=config.wavelet_fraction,
        target_core=config.target_core,
        max_block=config.max_block,
        seed=config.rhs_seed,
    )
    return mmf_mod.pmmf(A, cfg, workers=config.workers)


def write_residual_csv(path, history):
    with open(path, "w") as fh:
        fh.write("iteration,relative_residual\n")
        for i, r in enumerate(history):
            fh.write(f"{i},{float(r)!r}\n")


def run_experiment(config):
    """Run one experiment; returns result rows and writes residual CSVs.

    Outputs land under config.out_dir as
    ``residuals_<dataset>_<method>.csv`` (one per preconditioner, exactly
    iterations+1 data rows each). A dataset is marked shown when at least
    one method converged.
    """
    os.makedirs(config.out_dir, exist_ok=True)
    A, per_dim, dims, source_flags = _load_source(config)
    n = A.n

    basis = None
    if any(p in WAVELET_METHODS for p in config.preconditioners):
        basis = WaveletBasis(per_dim, taps=config.taps, levels=config.levels,
                             dims=dims)

    rhs = np.random.default_rng(config.rhs_seed).standard_normal(n)

    rows = []
    histories = {}
    for method in config.preconditioners:
        t0 = time.perf_counter()
        P = _build_preconditioner(method, A, basis, config)
        setup = time.perf_counter() - t0
        x, rep = solve_preconditioned(A, rhs, method, P,
                                      tol=config.tol, maxit=config.maxit)
        flags = source_flags + rep.flags
        if method in WAVELET_METHODS:
            flags += basis.flags
        if not rep.converged:
            flags += ("DNC",)
        rows.append(ResultRow(
            dataset=config.dataset, n=n, nnz=A.nnz, method=method,
            converged=rep.converged, iterations=rep.iterations,
            maxit=config.maxit, setup_seconds=setup,
            solve_seconds=rep.solve_seconds,
            true_relative_residual=rep.true_relative_residual,
            flags=tuple(dict.fromkeys(flags))))
        histories[method] = rep.residual_history
        path = os.path.join(config.out_dir,
                            f"residuals_{config.dataset}_{method}.csv")
        write_residual_csv(path, rep.residual_history)

    shown = any(r.converged for r in rows)
    rows = [replace(r, shown=shown) for r in rows]

    if config.figures:
        from .plots import render_residual_figure

        render_residual_figure(
            histories,
            os.path.join(config.out_dir, f"residuals_{config.dataset}.png"),
            title=f"{config.dataset} (n={n})")
    return rows


CSV_COLUMNS = (
    "dataset", "n", "nnz", "method", "iterations", "converged",
    "setup_seconds", "solve_seconds", "total_seconds",
    "true_relative_residual", "flags", "shown", "best",
)


def mark_best(rows):
    """Flag the best method per dataset: fewest iterations, ties by time."""
    rows = list(rows)
    by_dataset = {}
    for r in rows:
        by_dataset.setdefault(r.dataset, []).append(r)
    out = []
    for r in rows:
        group = by_dataset[r.dataset]
        winner = min(group, key=lambda q: (q.dnc, q.iterations, q.total_seconds))
        out.append(replace(r, best=r is winner))
    return out


def emit_tables(rows, out_dir, basename="results"):
    """Write the aggregate CSV and an aligned text table.

    DNC renders as an empty iterations cell plus a DNC flag in the CSV and
    as the string DNC in the text table; the best method per dataset is
    starred.
    """
    os.makedirs(out_dir, exist_ok=True)
    rows = mark_best(rows)
    csv_path = os.path.join(out_dir, f"{basename}.csv")
    with open(csv_path, "w") as fh:
        fh.write(",".join(CSV_COLUMNS) + "\n")
        for r in rows:
            rec = {
                "dataset": r.dataset,
                "n": str(r.n),
                "nnz": str(r.nnz),
                "method": r.method,
                "iterations": "" if r.dnc else str(r.iterations),
                "converged": str(r.converged).lower(),
                "setup_seconds": f"{r.setup_seconds:.6f}",
                "solve_seconds": f"{r.solve_seconds:.6f}",
                "total_seconds": f"{r.total_seconds:.6f}",
                "true_relative_residual": repr(float(r.true_relative_residual)),
                "flags": ";".join(r.flags),
                "shown": str(r.shown).lower(),
                "best": str(r.best).lower(),
            }
            fh.write(",".join(rec[c] for c in CSV_COLUMNS) + "\n")

    txt_path = os.path.join(out_dir, f"{basename}.txt")
    headers = ("dataset", "n", "nnz", "method", "iters", "setup[s]",
               "solve[s]", "total[s]", "true relres", "flags")
    lines = []
    for r in rows:
        iters = "DNC" if r.dnc else str(r.iterations)
        if r.best:
            iters = f"*{iters}"
        lines.append((
            r.dataset, str(r.n), str(r.nnz), r.method, iters,
            f"{r.setup_seconds:.3f}", f"{r.solve_seconds:.3f}",
            f"{r.total_seconds:.3f}", f"{r.true_relative_residual:.3e}",
            ";".join(r.flags)))
    widths = [max(len(h), *(len(l[i]) for l in lines)) if lines else len(h)
              for i, h in enumerate(headers)]
    with open(txt_path, "w") as fh:
        fh.write("  ".join(h.ljust(w) for h, w in zip(headers, widths)).rstrip() + "\n")
        fh.write("  ".join("-" * w for w in widths) + "\n")
        for l in lines:
            fh.write("  ".join(v.ljust(w) for v, w in zip(l, widths)).rstrip() + "\n")
    return csv_path, txt_path
