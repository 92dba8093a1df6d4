"""Benchmark command line: solve one experiment, sweep sources, merge tables.

Outputs land under --out with documented names: residuals_<dataset>_<method>.csv
per preconditioner, results.csv / results.txt from the table emitter, and
residuals_<dataset>.png figures unless --no-figures. MMFPREC_WORKERS controls
the worker-thread count of the staged factorization.
"""

import csv
import os

import click

from .experiment import (
    CSV_COLUMNS,
    ExperimentConfig,
    ResultRow,
    emit_tables,
    run_experiment,
)
from ..problems import PROBLEM_KINDS

_PRECONDS = ("none", "ctw", "hc", "mmf")


def _common_options(fn):
    opts = [
        click.option("--precond", "preconds", multiple=True,
                     type=click.Choice(_PRECONDS),
                     help="Preconditioner to run (repeatable); default: protocol set."),
        click.option("--tol", type=float, default=None,
                     help="GMRES relative-residual tolerance (default per protocol)."),
        click.option("--maxit", type=int, default=None,
                     help="Iteration cap (default per protocol)."),
        click.option("--taps", type=int, default=4, show_default=True,
                     help="Daubechies filter length (2, 4, 6 or 8)."),
        click.option("--levels", type=int, default=8, show_default=True,
                     help="Wavelet transform levels (clamped to the dyadic depth)."),
        click.option("--block-size", type=int, default=None,
                     help="Uniform block size for the block-diagonal SPAI "
                          "(default: dyadic bands)."),
        click.option("--core", type=int, default=100, show_default=True,
                     help="Target core size of the staged factorization."),
        click.option("--max-block", type=int, default=2000, show_default=True,
                     help="Cluster size cap of the staged factorization."),
        click.option("--wavelet-fraction", type=float, default=0.5,
                     show_default=True,
                     help="Fraction of active columns retired per stage."),
        click.option("--rhs-seed", type=int, default=0, show_default=True),
        click.option("--trim-seed", type=int, default=0, show_default=True),
        click.option("--out", "out_dir", type=click.Path(), default="bench-out",
                     show_default=True),
        click.option("--figures/--no-figures", default=True, show_default=True),
    ]
    for opt in reversed(opts):
        fn = opt(fn)
    return fn


def _make_config(problem, m, matrix, **kw):
    return ExperimentConfig(
        problem=problem, m=m, matrix_path=matrix,
        preconditioners=kw["preconds"] or None,
        tol=kw["tol"], maxit=kw["maxit"], taps=kw["taps"], levels=kw["levels"],
        block_size=kw["block_size"], target_core=kw["core"],
        max_block=kw["max_block"], wavelet_fraction=kw["wavelet_fraction"],
        rhs_seed=kw["rhs_seed"], trim_seed=kw["trim_seed"],
        out_dir=kw["out_dir"], figures=kw["figures"],
        workers=int(os.environ.get("MMFPREC_WORKERS", "1")),
    )


@click.group()
def main():
    """Preconditioner benchmarks for symmetric linear systems."""


@main.command()
@click.option("--problem", type=click.Choice(PROBLEM_KINDS), default=None,
              help="Model problem kind.")
@click.option("--m", type=int, default=None,
              help="Interior mesh points per dimension of the model problem.")
@click.option("--matrix", type=click.Path(exists=True), default=None,
              help="Matrix Market file to solve instead of a model problem.")
@_common_options
def solve(problem, m, matrix, **kw):
    """Run one experiment: build each preconditioner, solve, report."""
    config = _make_config(problem, m, matrix, **kw)
    rows = run_experiment(config)
    csv_path, txt_path = emit_tables(rows, config.out_dir)
    with open(txt_path) as fh:
        click.echo(fh.read().rstrip())
    click.echo(f"\nwrote {csv_path}")


@main.command()
@click.option("--problem", "problems", multiple=True,
              help="Model problem as kind:m (repeatable), e.g. lap2d:31.")
@click.option("--matrix", "matrices", multiple=True, type=click.Path(exists=True),
              help="Matrix Market file (repeatable).")
@_common_options
def sweep(problems, matrices, **kw):
    """Run a list of sources and emit one aggregate table."""
    sources = []
    for token in problems:
        kind, _, mstr = token.partition(":")
        if kind not in PROBLEM_KINDS or not mstr.isdigit():
            raise click.BadParameter(f"expected kind:m, got {token!r}")
        sources.append((kind, int(mstr), None))
    sources.extend((None, None, path) for path in matrices)
    if not sources:
        raise click.UsageError("no sources; pass --problem and/or --matrix")

    all_rows = []
    for kind, m, path in sources:
        config = _make_config(kind, m, path, **kw)
        click.echo(f"running {config.dataset} ...")
        all_rows.extend(run_experiment(config))
    csv_path, txt_path = emit_tables(all_rows, kw["out_dir"])
    if kw["figures"]:
        from .plots import render_iteration_bars

        render_iteration_bars(all_rows,
                              os.path.join(kw["out_dir"], "iterations.png"))
    with open(txt_path) as fh:
        click.echo(fh.read().rstrip())
    click.echo(f"\nwrote {csv_path}")


@main.command()
@click.option("--results", "paths", multiple=True, required=True,
              type=click.Path(exists=True),
              help="results.csv file to merge (repeatable).")
@click.option("--out", "out_dir", type=click.Path(), default="bench-out",
              show_default=True)
def tables(paths, out_dir):
    """Merge result CSVs and re-emit the aggregate table."""
    rows = []
    for path in paths:
        with open(path) as fh:
            for rec in csv.DictReader(fh):
                if set(CSV_COLUMNS) - set(rec):
                    raise click.ClickException(f"{path}: unexpected columns")
                dnc = rec["iterations"] == ""
                rows.append(ResultRow(
                    dataset=rec["dataset"], n=int(rec["n"]), nnz=int(rec["nnz"]),
                    method=rec["method"], converged=rec["converged"] == "true",
                    iterations=0 if dnc else int(rec["iterations"]),
                    maxit=0 if dnc else int(rec["iterations"]),
                    setup_seconds=float(rec["setup_seconds"]),
                    solve_seconds=float(rec["solve_seconds"]),
                    true_relative_residual=float(rec["true_relative_residual"]),
                    flags=tuple(f for f in rec["flags"].split(";") if f),
                    shown=rec["shown"] == "true"))
    csv_path, txt_path = emit_tables(rows, out_dir, basename="combined")
    with open(txt_path) as fh:
        click.echo(fh.read().rstrip())
    click.echo(f"\nwrote {csv_path}")


if __name__ == "__main__":
    main()
