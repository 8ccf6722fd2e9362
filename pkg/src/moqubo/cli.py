"""Command-line experiment harness.

Subcommands: ``generate`` (synthesise an instance file), ``inspect``
(instance statistics), ``run`` (execute an experiment grid), ``summarize``
(aggregate run reports into a table) and ``eaf`` (attainment-surface
export).  Exit codes: 0 success, 1 configuration error, 2 partial failure.
"""

from __future__ import annotations

import logging
import sys
from pathlib import Path

import click

from .anneal import SolverParams
from .bench import (
    BenchConfigError,
    ExperimentConfig,
    METHOD_LABELS,
    export_eaf,
    run_experiment,
    scalarise_config_for,
    summarize,
)
from .instances import (
    InstanceFormatError,
    corpus_filename,
    corpus_fingerprint,
    generate_instance,
    load_instance,
    save_instance,
)
from .pareto import ReferencePoint

# Configuration problems (including argument parsing) exit with code 1;
# click's default of 2 is reserved for partial experiment failures.
click.UsageError.exit_code = 1

_CONFIG_ERRORS = (BenchConfigError, InstanceFormatError, ValueError, OSError)


def _fail(message: str) -> None:
    click.echo(f"error: {message}", err=True)
    sys.exit(1)


@click.group()
@click.option("-v", "--verbose", is_flag=True, help="Enable info-level logging.")
def main(verbose: bool) -> None:
    """Multi-objective QUBO benchmarking toolkit."""
    logging.basicConfig(
        level=logging.INFO if verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )


def _solver_options(fn):
    for option in reversed(
        [
            click.option("--iters", type=int, default=1_000_000, show_default=True, help="Iterations per replica."),
            click.option("--replicas", type=int, default=128, show_default=True, help="Independent annealing chains."),
            click.option("--t0", type=float, default=1.0e4, show_default=True, help="Start temperature."),
            click.option("--beta", type=float, default=0.2, show_default=True, help="Temperature decay per interval."),
            click.option("--interval", type=int, default=1, show_default=True, help="Iterations between decays."),
            click.option("--offset-rate", type=float, default=1.0e3, show_default=True, help="Dynamic offset increase per rejection."),
            click.option("--top-k", type=int, default=128, show_default=True, help="Solutions kept per solver call."),
        ]
    ):
        fn = option(fn)
    return fn


@main.command()
@click.option("--n", type=int, required=True, help="Number of binary variables.")
@click.option("--m", type=int, required=True, help="Number of objectives.")
@click.option("--rho", type=float, default=0.0, show_default=True, help="Target objective correlation.")
@click.option("--density", type=float, default=0.8, show_default=True, help="Fraction of nonzero coefficient vectors.")
@click.option("--coeff-range", type=int, default=100, show_default=True, help="Coefficients are uniform integers in [-R, R].")
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("-o", "--output", type=click.Path(path_type=Path), default=None, help="Output file [default: ./<rho>_<m>_<n>_<d>_<seed>.dat]")
def generate(n, m, rho, density, coeff_range, seed, output):
    """Generate a synthetic instance file."""
    try:
        instance = generate_instance(
            n=n, m=m, rho=rho, density=density, coeff_range=coeff_range, seed=seed
        )
        if output is None:
            output = Path(corpus_filename(rho, m, n, density, seed) + ".dat")
        save_instance(instance, output)
    except _CONFIG_ERRORS as exc:
        _fail(str(exc))
    click.echo(f"wrote {output}")
    click.echo(corpus_fingerprint(instance).summary())


@main.command()
@click.argument("instance", type=click.Path(exists=True, path_type=Path))
def inspect(instance):
    """Print summary statistics of an instance file."""
    try:
        parsed = load_instance(instance)
    except _CONFIG_ERRORS as exc:
        _fail(str(exc))
    click.echo(f"instance: {instance}")
    click.echo(corpus_fingerprint(parsed).summary())


@main.command()
@click.option("--instance", "instance_path", type=click.Path(exists=True, path_type=Path), required=True)
@click.option("--method", "methods", type=click.Choice(METHOD_LABELS), multiple=True, required=True, help="Repeatable; methods share one reference point.")
@click.option("--weights", type=int, default=10, show_default=True, help="Scalarisation weights (solver calls) per run.")
@click.option("--runs", type=int, default=20, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True, help="Base seed of the experiment grid.")
@click.option("--out", "out_dir", type=click.Path(path_type=Path), required=True, help="Output directory (reports.jsonl, fronts/, figures).")
@click.option("--reference", type=str, default=None, help="Explicit reference point 'v1,v2,...' (otherwise derived from the uniform runs).")
@click.option("--plot/--no-plot", default=True, show_default=True, help="Render a front overlay figure next to the CSVs.")
@_solver_options
def run(instance_path, methods, weights, runs, seed, out_dir, reference, plot,
        iters, replicas, t0, beta, interval, offset_rate, top_k):
    """Run an experiment grid of (method, run) cells on one instance."""
    try:
        solver = SolverParams(
            t0=t0,
            beta=beta,
            interval=interval,
            offset_rate=offset_rate,
            iterations=iters,
            replicas=replicas,
            top_k=top_k,
            seed=0,
        )
        ref = None
        if reference is not None:
            ref = ReferencePoint(tuple(float(v) for v in reference.split(",")))
        config = ExperimentConfig(
            instance_path=instance_path,
            methods=tuple(scalarise_config_for(lab, weights, solver) for lab in methods),
            runs=runs,
            base_seed=seed,
            output_dir=out_dir,
            reference=ref,
        )
        result = run_experiment(config)
    except _CONFIG_ERRORS as exc:
        _fail(str(exc))
    click.echo(f"reference point: {result.reference.bounds}")
    for report in result.reports:
        click.echo(
            f"{report.method} run {report.run_index}: hv={report.hv:.6g} "
            f"nd={report.nd_count} ({report.wall_ms} ms)"
        )
    if plot and result.reports:
        from . import figures

        fig_path = figures.plot_fronts(result.reports, Path(out_dir) / "fronts.png")
        click.echo(f"wrote {fig_path}")
    if result.failures:
        for failure in result.failures:
            click.echo(
                f"FAILED {failure.method} run {failure.run_index}: {failure.message}",
                err=True,
            )
        sys.exit(2)


def _load_reports_arg(out_dir: Path):
    from .bench import _load_report_lines

    reports_path = Path(out_dir) / "reports.jsonl"
    if not reports_path.exists():
        raise BenchConfigError(f"no reports found at {reports_path}")
    _, reports = _load_report_lines(reports_path)
    if not reports:
        raise BenchConfigError(f"{reports_path} holds no completed runs")
    return reports


@main.command("summarize")
@click.option("--out", "out_dir", type=click.Path(exists=True, path_type=Path), required=True, help="Experiment directory holding reports.jsonl.")
@click.option("--plot/--no-plot", default=True, show_default=True, help="Render a mean-HV bar chart next to the CSV.")
def summarize_cmd(out_dir, plot):
    """Aggregate run reports into per-method statistics."""
    try:
        reports = _load_reports_arg(out_dir)
        summary = summarize(reports)
        csv_path = Path(out_dir) / "summary.csv"
        summary.to_csv(csv_path)
    except _CONFIG_ERRORS as exc:
        _fail(str(exc))
    click.echo(summary.to_text())
    click.echo(f"wrote {csv_path}")
    if plot:
        from . import figures

        fig_path = figures.plot_hv_summary(summary, Path(out_dir) / "summary.png")
        click.echo(f"wrote {fig_path}")


@main.command()
@click.option("--out", "out_dir", type=click.Path(exists=True, path_type=Path), required=True, help="Experiment directory holding reports.jsonl.")
@click.option("--method", type=click.Choice(METHOD_LABELS), required=True)
@click.option("--plot/--no-plot", default=True, show_default=True, help="Render the surfaces next to the CSVs.")
def eaf(out_dir, method, plot):
    """Export best/median/worst attainment surfaces of one method."""
    try:
        reports = [r for r in _load_reports_arg(out_dir) if r.method == method]
        if not reports:
            raise BenchConfigError(f"no completed runs for method {method!r}")
        paths = export_eaf(reports, Path(out_dir) / "eaf")
    except _CONFIG_ERRORS as exc:
        _fail(str(exc))
    for label, path in paths.items():
        click.echo(f"wrote {path} ({label})")
    if plot:
        import numpy as np

        from . import figures

        surfaces = {
            label: np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
            for label, path in paths.items()
        }
        fig_path = figures.plot_attainment(
            surfaces, Path(out_dir) / "eaf" / f"eaf_{method}.png", title=method
        )
        click.echo(f"wrote {fig_path}")


if __name__ == "__main__":
    main()
