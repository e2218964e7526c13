"""
CLI entrypoint for the mm-Wave initial-access simulator.

Commands:
  sweep-distance – PMD vs BS-UE distance at a fixed PSS duration.
  sweep-tsig     – PMD and discovery delay over a PSS-duration grid.
  min-tsig       – Shortest PSS duration meeting the PMD target.
  table3         – Slot counts and discovery delays of the reference configs.
  validate       – Run the oracle checks (no simulation).

CSV goes to --out (default standard output); logs and summaries go to
standard error.
"""

from __future__ import annotations

import logging
import sys
from typing import Optional

import click
from rich.console import Console
from rich.logging import RichHandler
from rich.panel import Panel
from rich.table import Table

from engine import __version__
from engine.core import ExperimentResult, ExperimentRunner
from engine.models import ProcedureKind, RunSpec, Subcommand
from engine.report import TABLE_DISTANCES, format_ms, format_pmd, format_us

console = Console(stderr=True)

PROCEDURE_CHOICES = [k.value for k in ProcedureKind]


def _setup_logging(verbose: bool = False) -> None:
    level = logging.DEBUG if verbose else logging.INFO
    logging.basicConfig(
        level=level,
        format="%(message)s",
        datefmt="[%X]",
        handlers=[RichHandler(rich_tracebacks=True, console=console)],
        force=True,
    )


def _common_options(fn):
    """--config/--out/--seed/--trials/--workers/--verbose for every command."""
    options = [
        click.option(
            "--config", "-c", "config_path", default=None,
            help="Scenario config file (flat YAML); defaults apply when omitted.",
        ),
        click.option(
            "--out", "-o", "output_path", default=None,
            help="CSV output path (default: standard output).",
        ),
        click.option("--seed", type=click.IntRange(min=0), default=None, help="Override run.seed."),
        click.option("--trials", type=click.IntRange(min=1), default=None, help="Override run.trials."),
        click.option(
            "--workers", type=click.IntRange(min=1), default=None,
            help="Worker processes (results do not depend on this).",
        ),
        click.option("--verbose", "-v", is_flag=True, help="Enable verbose logging."),
    ]
    for option in reversed(options):
        fn = option(fn)
    return fn


def _procedure_options(fn):
    fn = click.option(
        "--ue-beams", type=click.Choice(["4", "8"]), multiple=True,
        help="UE codebook size (4 = 2x2 array, 8 = 4x4 array); repeatable.",
    )(fn)
    fn = click.option(
        "--procedure", type=click.Choice(PROCEDURE_CHOICES), multiple=True,
        help="Search procedure; repeatable (paired trials).",
    )(fn)
    return fn


def _run(spec: RunSpec, verbose: bool) -> None:
    _setup_logging(verbose)
    console.print(
        Panel(
            f"[bold cyan]{spec.subcommand.value}[/bold cyan]\n"
            f"Config: [green]{spec.config_path or 'defaults'}[/green]  "
            f"Output: [green]{spec.output_path or 'stdout'}[/green]",
            title="mm-Wave initial access",
            border_style="cyan",
        )
    )
    result = ExperimentRunner().execute(spec)
    _display_results(result)
    sys.exit(result.exit_code)


# ------------------------------------------------------------------
# CLI group
# ------------------------------------------------------------------


@click.group()
@click.version_option(version=__version__, prog_name="mmwave-ia")
def cli():
    """Monte Carlo simulator of directional cell search in mm-Wave networks."""
    pass


# ------------------------------------------------------------------
# Simulation commands
# ------------------------------------------------------------------


@cli.command("sweep-distance")
@_common_options
@_procedure_options
@click.option("--distance", type=float, multiple=True, help="Ring radius in m; repeatable.")
@click.option("--tsig", type=float, default=None, help="PSS duration in seconds.")
def sweep_distance(
    config_path: Optional[str],
    output_path: Optional[str],
    seed: Optional[int],
    trials: Optional[int],
    workers: Optional[int],
    verbose: bool,
    procedure: tuple[str, ...],
    ue_beams: tuple[str, ...],
    distance: tuple[float, ...],
    tsig: Optional[float],
):
    """PMD vs distance (UE on a ring of each radius)."""
    _run(
        RunSpec(
            subcommand=Subcommand.SWEEP_DISTANCE,
            config_path=config_path,
            output_path=output_path,
            seed_override=seed,
            trials_override=trials,
            workers_override=workers,
            procedures=list(procedure),
            ue_beams=[int(b) for b in ue_beams],
            distances=list(distance),
            t_sigs=[tsig] if tsig is not None else [],
        ),
        verbose,
    )


@cli.command("sweep-tsig")
@_common_options
@_procedure_options
@click.option("--distance", type=float, multiple=True, help="Ring radius in m; repeatable.")
@click.option("--tsig", type=float, multiple=True, help="PSS duration in seconds; repeatable.")
def sweep_tsig(
    config_path: Optional[str],
    output_path: Optional[str],
    seed: Optional[int],
    trials: Optional[int],
    workers: Optional[int],
    verbose: bool,
    procedure: tuple[str, ...],
    ue_beams: tuple[str, ...],
    distance: tuple[float, ...],
    tsig: tuple[float, ...],
):
    """PMD and discovery delay over a PSS-duration grid at constant overhead."""
    _run(
        RunSpec(
            subcommand=Subcommand.SWEEP_TSIG,
            config_path=config_path,
            output_path=output_path,
            seed_override=seed,
            trials_override=trials,
            workers_override=workers,
            procedures=list(procedure),
            ue_beams=[int(b) for b in ue_beams],
            distances=list(distance),
            t_sigs=list(tsig),
        ),
        verbose,
    )


@cli.command("min-tsig")
@_common_options
@_procedure_options
@click.option("--distance", type=float, multiple=True, help="Ring radius in m; repeatable.")
@click.option("--target-pmd", type=float, default=None, help="Override run.target_pmd.")
def min_tsig(
    config_path: Optional[str],
    output_path: Optional[str],
    seed: Optional[int],
    trials: Optional[int],
    workers: Optional[int],
    verbose: bool,
    procedure: tuple[str, ...],
    ue_beams: tuple[str, ...],
    distance: tuple[float, ...],
    target_pmd: Optional[float],
):
    """Shortest PSS duration with PMD below the target (exit 3 if unreachable)."""
    _run(
        RunSpec(
            subcommand=Subcommand.MIN_TSIG,
            config_path=config_path,
            output_path=output_path,
            seed_override=seed,
            trials_override=trials,
            workers_override=workers,
            procedures=list(procedure),
            ue_beams=[int(b) for b in ue_beams],
            distances=list(distance),
            target_pmd=target_pmd,
        ),
        verbose,
    )


# ------------------------------------------------------------------
# Reference commands
# ------------------------------------------------------------------


@cli.command("table3")
@_common_options
@click.option(
    "--simulate", is_flag=True,
    help="Add simulated minimum-T_sig columns at 95 m and 35 m (model-dependent).",
)
@click.option("--target-pmd", type=float, default=None, help="Override run.target_pmd.")
def table3(
    config_path: Optional[str],
    output_path: Optional[str],
    seed: Optional[int],
    trials: Optional[int],
    workers: Optional[int],
    verbose: bool,
    simulate: bool,
    target_pmd: Optional[float],
):
    """Slot counts and discovery delays of the six reference configurations."""
    _run(
        RunSpec(
            subcommand=Subcommand.TABLE3,
            config_path=config_path,
            output_path=output_path,
            seed_override=seed,
            trials_override=trials,
            workers_override=workers,
            target_pmd=target_pmd,
            simulate=simulate,
        ),
        verbose,
    )


@cli.command()
@_common_options
def validate(
    config_path: Optional[str],
    output_path: Optional[str],
    seed: Optional[int],
    trials: Optional[int],
    workers: Optional[int],
    verbose: bool,
):
    """Slot-count, delay-arithmetic and LOS-probability oracles (exit 1 on failure)."""
    _run(
        RunSpec(
            subcommand=Subcommand.VALIDATE,
            config_path=config_path,
            output_path=output_path,
            seed_override=seed,
            trials_override=trials,
            workers_override=workers,
        ),
        verbose,
    )


# ------------------------------------------------------------------
# Summaries (standard error)
# ------------------------------------------------------------------


def _display_results(result: ExperimentResult) -> None:
    if result.error:
        console.print(f"[bold red]❌ {result.error}[/bold red]")
        return

    if result.checks:
        table = Table(title="Oracle Checks", show_lines=False)
        table.add_column("Check", style="cyan")
        table.add_column("Expected", justify="right")
        table.add_column("Actual", justify="right")
        table.add_column("Result", justify="center")
        for check in result.checks:
            table.add_row(
                check.name,
                f"{check.expected:.6g}",
                f"{check.actual:.6g}",
                "[green]PASS[/green]" if check.passed else "[red]FAIL[/red]",
            )
        console.print(table)
        passed = sum(1 for c in result.checks if c.passed)
        console.print(f"Checks: {passed}/{len(result.checks)} passed")
        return

    if result.delay_rows:
        table = Table(title="Discovery Delay", show_lines=False)
        table.add_column("Procedure", style="cyan")
        table.add_column("BS x UE", justify="center")
        table.add_column("N_s", justify="right", style="bold")
        for d in TABLE_DISTANCES:
            table.add_column(f"T_sig {d:g} m (µs)", justify="right")
            table.add_column(f"Delay {d:g} m (ms)", justify="right")
        for row in result.delay_rows:
            cells = [
                row.config.label,
                f"{row.config.bs_antennas}x{row.config.ue_antennas}",
                str(row.n_slots),
            ]
            for d in TABLE_DISTANCES:
                bound = ">" if d in row.entry.lower_bound_at else ""
                cells += [bound + format_us(row.entry.t_sig[d]), bound + format_ms(row.delay_s[d])]
            table.add_row(*cells)
        console.print(table)
        return

    if result.rows:
        table = Table(title="PMD Estimates", show_lines=False)
        table.add_column("Procedure", style="cyan")
        table.add_column("BS x UE", justify="center")
        table.add_column("d (m)", justify="right")
        table.add_column("T_sig (µs)", justify="right")
        table.add_column("PMD", justify="right", style="bold")
        table.add_column("±95%", justify="right")
        table.add_column("Delay (ms)", justify="right")
        table.add_column("Note", style="yellow")
        for row in result.rows:
            table.add_row(
                row.procedure,
                f"{row.bs_antennas}x{row.ue_antennas}",
                f"{row.distance_m:g}",
                format_us(row.t_sig_s),
                format_pmd(row.pmd),
                format_pmd(row.ci95),
                format_ms(row.delay_s),
                row.note or "—",
            )
        console.print(table)


# ------------------------------------------------------------------
# Entrypoint
# ------------------------------------------------------------------

if __name__ == "__main__":
    cli()
