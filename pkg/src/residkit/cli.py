# SPDX-FileCopyrightText: 2025-present Miguel Paraz <mparaz@mparaz.com>
#
# SPDX-License-Identifier: MIT

"""Command line interface for residkit."""

import logging
import os
import sys
import warnings
from pathlib import Path
from typing import Any, Dict, List

import click
import numpy as np
import pandas as pd

from residkit.__about__ import __version__
from residkit.calibration import (
    Side,
    TestSpec,
    calibrated_alpha,
    full_report,
    power_percentile,
    power_standard,
    power_star_calibrated,
    simulate_rejection_rate,
)
from residkit.diagnostics import PANEL_NAMES, Correction, diagnose, write_panels
from residkit.errors import NonConvergenceWarning, ResidkitError
from residkit.io import (
    dump_json,
    load_distributions,
    load_observations,
    parse_distribution_spec,
    read_residuals,
    write_frame,
    write_residuals,
)
from residkit.manifest import RunManifest
from residkit.residuals import DEFAULT_TRUNC_BOUND, Which, batch_residuals
from residkit.simulation.config import Hypothesis, load_sim_config
from residkit.simulation.study import figure_replication, run_study

EXIT_OK = 0
EXIT_FATAL = 1
EXIT_PARTIAL = 2

alpha_option = click.option(
    "--alpha",
    "-a",
    type=click.FloatRange(0.0, 1.0, min_open=True, max_open=True),
    default=0.05,
    show_default=True,
    help="Nominal significance level",
)
side_option = click.option(
    "--side",
    "-s",
    type=click.Choice([side.value for side in Side]),
    default=Side.RIGHT.value,
    show_default=True,
    help="Test side",
)
format_option = click.option(
    "--format",
    "fmt",
    type=click.Choice(["csv", "json"]),
    default="csv",
    show_default=True,
    help="Output format for tabular artifacts",
)


def _replay_argv(ctx: click.Context) -> List[str]:
    """Rebuild the subcommand's arguments from its resolved parameters."""
    options: List[str] = []
    arguments: List[str] = []
    for param in ctx.command.params:
        value = ctx.params.get(param.name)
        if value is None:
            continue
        if isinstance(param, click.Argument):
            arguments.append(str(value))
        elif isinstance(param, click.Option):
            if param.is_flag and param.secondary_opts:
                options.append(param.opts[0] if value else param.secondary_opts[0])
            elif param.is_flag:
                if value:
                    options.append(param.opts[0])
            else:
                options.extend([param.opts[0], str(value)])
    return [ctx.info_name or ctx.command.name or "", *options, *arguments]


def _write_manifest(
    ctx: click.Context,
    inputs: List[Path],
    out_dir: Path,
    seed: int | None = None,
) -> Path:
    # Declaration order, so a replayed run writes the same bytes.
    options = {}
    for param in ctx.command.params:
        if param.name in ctx.params:
            value = ctx.params[param.name]
            options[param.name] = str(value) if isinstance(value, Path) else value
    manifest = RunManifest.create(
        command=ctx.command.name or "",
        argv=_replay_argv(ctx),
        options=options,
        input_paths=[path for path in inputs if path.is_file()],
        out_dir=out_dir,
        seed=seed,
    )
    path = manifest.write(out_dir)
    if ctx.obj.get("verbose"):
        click.echo(f"🧾 Manifest: {path}")
    return path


def _fail(e: Exception) -> None:
    click.echo(f"❌ Error: {e}")
    sys.exit(EXIT_FATAL)


def _spec_inputs(*texts: str) -> List[Path]:
    return [Path(text) for text in texts if text.endswith(".json") and Path(text).is_file()]


@click.group()
@click.version_option(__version__, prog_name="residkit")
@click.option(
    "--verbose",
    "-v",
    is_flag=True,
    help="Enable verbose output",
)
@click.pass_context
def main(ctx: click.Context, verbose: bool) -> None:
    """Percentile-based residuals, calibration and residual diagnostics."""
    ctx.ensure_object(dict)
    ctx.obj["verbose"] = verbose
    if verbose:
        logger = logging.getLogger("residkit")
        logger.setLevel(logging.DEBUG)
        if not logger.handlers:
            handler = logging.StreamHandler()
            handler.setFormatter(logging.Formatter("%(name)s: %(message)s"))
            logger.addHandler(handler)


@main.command()
@click.argument("observations", type=click.Path(exists=True, dir_okay=False, path_type=Path))
@click.argument("distributions", type=click.Path(exists=True, dir_okay=False, path_type=Path))
@click.option(
    "--trunc-bound",
    type=float,
    default=DEFAULT_TRUNC_BOUND,
    show_default=True,
    help="Residuals are clipped to [-bound, bound]",
)
@click.option(
    "--out",
    "-o",
    type=click.Path(dir_okay=False, path_type=Path),
    default=Path("residuals.csv"),
    show_default=True,
    help="Residuals output file; summary and manifest are written next to it",
)
@format_option
@click.pass_context
def residuals(
    ctx: click.Context,
    observations: Path,
    distributions: Path,
    trunc_bound: float,
    out: Path,
    fmt: str,
) -> None:
    """Compute standard and percentile residuals for every observation.

    DISTRIBUTIONS is a JSON map of unit_id to distribution, or a long-format
    draws CSV with columns unit_id,draw.
    """
    verbose = ctx.obj.get("verbose")
    click.echo("🔍 Starting residual computation...")

    try:
        click.echo(f"📖 Loading observations from {observations}...")
        obs = load_observations(observations)
        click.echo(f"📖 Loading predictive distributions from {distributions}...")
        dists = load_distributions(distributions)
        click.echo(f"✅ Found {len(obs)} observation(s) and {len(dists)} distribution(s)")

        result = batch_residuals(obs, dists, trunc_bound)
        write_residuals(result.records, out, fmt)

        summary = {
            "n_observations": len(obs),
            "n_records": len(result.records),
            "n_truncated": result.n_truncated,
            "errors": [
                {
                    "type": type(error).__name__,
                    "unit_id": getattr(error, "unit_id", None),
                    "message": str(error),
                }
                for error in result.errors
            ],
        }
        out_dir = out.parent
        dump_json(summary, out_dir / "summary.json")
        _write_manifest(ctx, [observations, distributions], out_dir)
    except (ResidkitError, OSError, ValueError) as e:
        _fail(e)

    for error in result.errors:
        click.echo(f"⚠️  {error}")
    if verbose:
        click.echo(f"📁 Residuals: {out}")

    click.echo("\n📊 Summary:")
    click.echo(f"   Units: {len(obs)}")
    click.echo(f"   ✅ Residuals: {len(result.records)}")
    truncated = result.n_truncated
    click.echo(
        f"   ✂️  Truncated: r_star {truncated['r_star']}, r_ddag {truncated['r_ddag']}"
    )
    click.echo(f"   ❌ Errors: {len(result.errors)}")

    if result.errors:
        click.echo("\n⚠️  Some units could not be processed. See summary.json.")
        sys.exit(EXIT_PARTIAL)
    click.echo("\n🎉 Residuals written!")


@main.command()
@click.argument("truth")
@click.argument("working")
@alpha_option
@side_option
@click.option(
    "--out",
    "-o",
    type=click.Path(dir_okay=False, path_type=Path),
    default=Path("report.json"),
    show_default=True,
    help="Calibration report output file",
)
@click.pass_context
def calibrate(
    ctx: click.Context, truth: str, working: str, alpha: float, side: str, out: Path
) -> None:
    """Report size, calibrated level and power of the residual tests.

    TRUTH and WORKING are distributions as inline JSON, e.g.
    '{"kind": "Exponential", "params": {"rate": 1}}', or paths to JSON files.
    """
    click.echo("🔍 Starting calibration...")
    try:
        f = parse_distribution_spec(truth)
        d = parse_distribution_spec(working)
        spec = TestSpec(Side(side), alpha)
        report = full_report(f, d, spec)
        dump_json(report.to_dict(), out)
        _write_manifest(ctx, _spec_inputs(truth, working), out.parent)
    except (ResidkitError, OSError, ValueError) as e:
        _fail(e)

    click.echo(f"📐 Working: {d!r}  Truth: {f!r}")
    click.echo(f"   Effective alpha: {report.effective_alpha:.10g} ({report.classification.value})")
    click.echo(f"   Calibrated alpha: {report.calibrated_alpha:.10g}")
    if report.root_residual is not None:
        click.echo(f"   Root residual: {report.root_residual:.3g}")
    click.echo(f"   Power R* raw: {report.pow_star_raw:.10g}")
    click.echo(f"   Power R* calibrated: {report.pow_star_calibrated:.10g}")
    click.echo(f"   Power R-ddag: {report.pow_ddag:.10g}")
    click.echo(f"\n🎉 Report written to {out}")


@main.command()
@click.argument("truth")
@click.argument("working")
@alpha_option
@side_option
@click.option(
    "--draws",
    type=click.IntRange(min=0),
    default=0,
    show_default=True,
    help="Monte Carlo draws for a simulated cross-check (0 disables)",
)
@click.option("--seed", type=click.IntRange(min=0), default=0, show_default=True)
@click.option(
    "--out",
    "-o",
    type=click.Path(dir_okay=False, path_type=Path),
    default=Path("power.json"),
    show_default=True,
    help="Power report output file",
)
@click.pass_context
def power(
    ctx: click.Context,
    truth: str,
    working: str,
    alpha: float,
    side: str,
    draws: int,
    seed: int,
    out: Path,
) -> None:
    """Compare the power of raw, calibrated and percentile residual tests."""
    click.echo("🔍 Starting power analysis...")
    try:
        f = parse_distribution_spec(truth)
        d = parse_distribution_spec(working)
        spec = TestSpec(Side(side), alpha)

        analytic = {
            "pow_star_raw": power_standard(f, d, spec),
            "pow_star_calibrated": power_star_calibrated(f, d, spec),
            "pow_ddag": power_percentile(f, d, spec),
        }
        report: Dict[str, Any] = {
            "spec": spec.to_dict(),
            "truth": f.to_dict(),
            "working": d.to_dict(),
            "analytic": analytic,
        }

        if draws:
            click.echo(f"🎲 Simulating {draws} draw(s) with seed {seed}...")
            level = calibrated_alpha(d, spec)
            estimates = {
                "pow_star_raw": simulate_rejection_rate(
                    f, d, spec, Which.STAR, draws, np.random.default_rng([seed, 0])
                ),
                "pow_star_calibrated": simulate_rejection_rate(
                    f, d, spec, Which.STAR, draws, np.random.default_rng([seed, 1]), level
                ),
                "pow_ddag": simulate_rejection_rate(
                    f, d, spec, Which.DDAG, draws, np.random.default_rng([seed, 2])
                ),
            }
            report["monte_carlo"] = {
                name: {"rate": est.rate, "se": est.se, "n_draws": est.n_draws}
                for name, est in estimates.items()
            }

        dump_json(report, out)
        _write_manifest(ctx, _spec_inputs(truth, working), out.parent, seed if draws else None)
    except (ResidkitError, OSError, ValueError) as e:
        _fail(e)

    for name, value in analytic.items():
        line = f"   {name}: {value:.10g}"
        if draws:
            est = report["monte_carlo"][name]
            line += f"  (simulated {est['rate']:.4f} ± {est['se']:.4f})"
        click.echo(line)
    click.echo(f"\n🎉 Report written to {out}")


@main.command(name="diagnose")
@click.argument("residuals_csv", type=click.Path(exists=True, dir_okay=False, path_type=Path))
@click.option(
    "--which",
    type=click.Choice([which.value for which in Which]),
    default=Which.DDAG.value,
    show_default=True,
    help="Residual kind to diagnose",
)
@alpha_option
@side_option
@click.option(
    "--correction",
    type=click.Choice([c.value for c in Correction]),
    default=Correction.NONE.value,
    show_default=True,
    help="Multiple testing correction across units",
)
@click.option(
    "--out-dir",
    type=click.Path(file_okay=False, path_type=Path),
    default=Path("diagnostics"),
    show_default=True,
)
@format_option
@click.pass_context
def diagnose_command(
    ctx: click.Context,
    residuals_csv: Path,
    which: str,
    alpha: float,
    side: str,
    correction: str,
    out_dir: Path,
    fmt: str,
) -> None:
    """Outlier tests, KS check and plot data for a residuals file."""
    click.echo("🔍 Starting residual diagnostics...")
    try:
        click.echo(f"📖 Loading residuals from {residuals_csv}...")
        records = read_residuals(residuals_csv)
        report = diagnose(records, Which(which), TestSpec(Side(side), alpha), Correction(correction))

        out_dir.mkdir(parents=True, exist_ok=True)
        outliers = pd.DataFrame([outlier.to_dict() for outlier in report.outliers])
        write_frame(outliers, out_dir / f"outliers.{fmt}", fmt)

        summary = report.to_dict()
        summary.pop("outliers")
        panels = summary.pop("panels")
        if report.panels is not None:
            has_fitted = bool(np.isfinite(report.panels.fitted[:, 0]).any())
            names = (*PANEL_NAMES, "fitted") if has_fitted else PANEL_NAMES
            write_panels(report.panels, out_dir, fmt=fmt, names=names)
            summary["bandwidth"] = panels["bandwidth"]
            summary["threshold"] = panels["threshold"]
        dump_json(summary, out_dir / "diagnostics.json")
        _write_manifest(ctx, [residuals_csv], out_dir)
    except (ResidkitError, OSError, ValueError) as e:
        _fail(e)

    click.echo("\n📊 Summary:")
    click.echo(f"   Units tested: {report.n_units}")
    if report.ks_pvalue is not None:
        click.echo(f"   KS statistic: {report.ks_statistic:.4f} (p = {report.ks_pvalue:.4g})")
    else:
        click.echo("   KS test skipped: too few residuals")
    click.echo(f"   ✂️  Truncated: {report.n_truncated}")
    click.echo(f"   🚩 Outliers: {report.n_rejected}")
    if ctx.obj.get("verbose"):
        for outlier in report.outliers:
            if outlier.rejected:
                click.echo(
                    f"   {outlier.unit_id}: residual {outlier.residual:.4f}, "
                    f"adjusted p {outlier.adjusted_pvalue:.4g}"
                )
    click.echo(f"\n🎉 Diagnostics written to {out_dir}")


@main.command()
@click.argument("config", type=click.Path(exists=True, dir_okay=False, path_type=Path))
@click.option("--replications", type=click.IntRange(min=0), help="Override n_replications")
@click.option("--seed", type=click.IntRange(min=0), help="Override master_seed")
@click.option(
    "--workers",
    type=click.IntRange(min=1),
    help="Worker processes (capped by RESIDKIT_THREADS)",
)
@click.option(
    "--figure/--no-figure",
    default=True,
    show_default=True,
    help="Write residual plot data from one K-unit replication per hypothesis",
)
@click.option(
    "--out-dir",
    type=click.Path(file_okay=False, path_type=Path),
    default=Path("simulation"),
    show_default=True,
)
@format_option
@click.pass_context
def simulate(
    ctx: click.Context,
    config: Path,
    replications: int | None,
    seed: int | None,
    workers: int | None,
    figure: bool,
    out_dir: Path,
    fmt: str,
) -> None:
    """Run the Beta-regression rejection-rate study from a YAML/JSON config."""
    click.echo("🔍 Starting simulation study...")
    try:
        click.echo(f"📋 Loading configuration from {config}...")
        cfg = load_sim_config(config)
        overrides: Dict[str, Any] = {}
        if replications is not None:
            overrides["n_replications"] = replications
        if seed is not None:
            overrides["master_seed"] = seed
        if overrides:
            cfg = cfg.replace(**overrides)
        if ctx.obj.get("verbose"):
            for key, value in cfg.to_dict().items():
                click.echo(f"   {key}: {value}")

        click.echo(
            f"🎲 Running {cfg.n_replications} replication(s) per cell, N in {list(cfg.cells)}..."
        )
        report = run_study(cfg, workers=workers)
        out_dir.mkdir(parents=True, exist_ok=True)
        write_frame(report.to_frame(), out_dir / f"study.{fmt}", fmt)

        figures = {}
        if figure:
            for hypothesis in Hypothesis:
                click.echo(f"📈 Building residual plot data under {hypothesis.value}...")
                with warnings.catch_warnings(record=True) as caught:
                    warnings.simplefilter("always", NonConvergenceWarning)
                    replication = figure_replication(cfg, hypothesis)
                for warning in caught:
                    click.echo(f"⚠️  {warning.message}")
                for which, panels in replication.panels.items():
                    write_panels(
                        panels,
                        out_dir,
                        prefix=f"{hypothesis.value}_",
                        suffix=f"_{which.value}",
                        fmt=fmt,
                    )
                figures[hypothesis.value] = replication.summary()
            dump_json(figures, out_dir / "figure_summary.json")

        _write_manifest(ctx, [config], out_dir, cfg.master_seed)
    except (ResidkitError, OSError, ValueError) as e:
        _fail(e)

    click.echo("\n📊 Summary:")
    failed = 0
    for cell in report.cells:
        failed += cell.n_failed
        click.echo(
            f"   {cell.hypothesis.value:<12} N={cell.N}: "
            f"R* {cell.rejection_rate_star:.3f}, "
            f"calibrated R* {cell.rejection_rate_star_calibrated:.3f}, "
            f"R-ddag {cell.rejection_rate_ddag:.3f}, "
            f"mean alpha* {cell.mean_calibrated_alpha:.3f}"
        )
        if cell.n_nonconverged:
            click.echo(f"   ⚠️  {cell.n_nonconverged} replication(s) did not converge")

    if failed:
        click.echo(f"\n⚠️  {failed} replication(s) failed and were dropped.")
        sys.exit(EXIT_PARTIAL)
    click.echo(f"\n🎉 Study written to {out_dir}")


@main.command()
@click.argument("manifest", type=click.Path(exists=True, dir_okay=False, path_type=Path))
@click.pass_context
def replay(ctx: click.Context, manifest: Path) -> None:
    """Re-run the command recorded in a manifest.json."""
    try:
        recorded = RunManifest.load(manifest)
    except (OSError, ValueError) as e:
        _fail(e)

    click.echo(f"🔁 Replaying '{recorded.command}' recorded by residkit {recorded.version}")
    if recorded.version != __version__:
        click.echo(f"⚠️  Running residkit {__version__}; outputs may differ")
    base = recorded.base_path(manifest)
    for path in recorded.changed_inputs(base):
        click.echo(f"⚠️  Input changed since the recorded run: {path}")

    args = ["--verbose", *recorded.argv] if ctx.obj.get("verbose") else recorded.argv
    # Recorded paths are relative to the directory the run started from.
    cwd = Path.cwd()
    os.chdir(base)
    try:
        main.main(args=args, prog_name="residkit", standalone_mode=False, obj={})
    finally:
        os.chdir(cwd)


if __name__ == "__main__":
    main()
