"""
ExperimentRunner (core) – High-level orchestrator for simulation runs.

Resolves the scenario (config file + command-line overrides), dispatches the
subcommand to the Monte Carlo layer or the oracle suite, and writes the
provenance header plus CSV body to a file or standard output:

  sweep-distance – PMD vs ring radius at a fixed PSS duration.
  sweep-tsig     – PMD and discovery delay over a t_sig grid.
  min-tsig       – shortest PSS meeting the PMD target.
  table3         – slot counts and delay arithmetic of the reference configs.
  validate       – oracle checks only, no simulation.
"""

from __future__ import annotations

import io
import itertools
import logging
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Optional

from engine.config import ConfigError, apply_overrides, load_config, parse_config
from engine.models import (
    ProcedureConfig,
    ResultRow,
    RunSpec,
    ScenarioConfig,
    Subcommand,
)
from engine.montecarlo import (
    min_tsig_for_pmd,
    simulate_trials,
    sweep_distance,
    sweep_tsig,
)
from engine.procedures import build_procedure
from engine.report import (
    TABLE_DISTANCES,
    DelayTableRow,
    OracleCheck,
    delay_table_rows,
    make_row,
    run_oracles,
    write_delay_table,
    write_header,
    write_rows,
)

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_VALIDATION_FAILED = 1
EXIT_CONFIG_ERROR = 2
EXIT_UNREACHABLE = 3
EXIT_IO_ERROR = 4


@dataclass
class ExperimentResult:
    """What one run produced; the CLI renders the summary from it."""

    subcommand: Subcommand
    exit_code: int = EXIT_OK
    scenario: Optional[ScenarioConfig] = None
    rows: list[ResultRow] = field(default_factory=list)
    delay_rows: list[DelayTableRow] = field(default_factory=list)
    checks: list[OracleCheck] = field(default_factory=list)
    error: str = ""


class ExperimentRunner:
    """
    Runs one subcommand end to end.

    Usage:
        runner = ExperimentRunner()
        code = runner.run(RunSpec(subcommand="table3"))
    """

    # ------------------------------------------------------------------
    # Entry points
    # ------------------------------------------------------------------

    def run(self, spec: RunSpec) -> int:
        return self.execute(spec).exit_code

    def execute(self, spec: RunSpec) -> ExperimentResult:
        result = ExperimentResult(subcommand=spec.subcommand)
        overrides = self._overrides(spec)

        try:
            scn = self._resolve_scenario(spec, overrides)
            procedures = self._procedures(spec, scn)
            self._regions(spec, scn)
        except ConfigError as e:
            logger.error("Config error: %s", e)
            result.exit_code = EXIT_CONFIG_ERROR
            result.error = str(e)
            return result
        except OSError as e:
            logger.error("Cannot read config: %s", e)
            result.exit_code = EXIT_IO_ERROR
            result.error = str(e)
            return result
        result.scenario = scn

        out = io.StringIO()
        write_header(out, scn, spec.subcommand.value, overrides, procedures)

        dispatch = {
            Subcommand.SWEEP_DISTANCE: self._sweep_distance,
            Subcommand.SWEEP_TSIG: self._sweep_tsig,
            Subcommand.MIN_TSIG: self._min_tsig,
            Subcommand.TABLE3: self._delay_table,
            Subcommand.VALIDATE: self._validate,
        }
        dispatch[spec.subcommand](spec, scn, procedures, result, out)

        try:
            self._write_output(out.getvalue(), spec.output_path)
        except OSError as e:
            logger.error("Cannot write output %s: %s", spec.output_path, e)
            result.exit_code = EXIT_IO_ERROR
            result.error = str(e)
        return result

    # ------------------------------------------------------------------
    # Scenario resolution
    # ------------------------------------------------------------------

    @staticmethod
    def _overrides(spec: RunSpec) -> dict[str, Any]:
        overrides: dict[str, Any] = {}
        if spec.seed_override is not None:
            overrides["run.seed"] = spec.seed_override
        if spec.trials_override is not None:
            overrides["run.trials"] = spec.trials_override
        if spec.workers_override is not None:
            overrides["run.workers"] = spec.workers_override
        if spec.target_pmd is not None:
            overrides["run.target_pmd"] = spec.target_pmd
        if spec.distances and spec.subcommand == Subcommand.SWEEP_DISTANCE:
            overrides["run.distances"] = list(spec.distances)
        if spec.t_sigs:
            if spec.subcommand == Subcommand.SWEEP_TSIG:
                overrides["run.t_sig_grid"] = list(spec.t_sigs)
            else:
                overrides["run.t_sig"] = spec.t_sigs[0]
        return overrides

    @staticmethod
    def _resolve_scenario(spec: RunSpec, overrides: dict[str, Any]) -> ScenarioConfig:
        scn = load_config(spec.config_path) if spec.config_path else parse_config("")
        return apply_overrides(scn, overrides)

    @staticmethod
    def _procedures(spec: RunSpec, scn: ScenarioConfig) -> list[ProcedureConfig]:
        """``--procedure`` x ``--ue-beams`` (cartesian), else the config's scheme."""
        if spec.subcommand in (Subcommand.TABLE3, Subcommand.VALIDATE):
            return []
        base = scn.procedure
        kinds = spec.procedures or [base.kind]
        beams = spec.ue_beams or [base.ue_beams]
        configs = []
        for kind, ue_beams in itertools.product(kinds, beams):
            update: dict[str, Any] = {"kind": kind, "ue_beams": ue_beams}
            if kind != base.kind:
                update["ci_half_window"] = None
            try:
                configs.append(build_procedure(base.model_copy(update=update)))
            except ValueError as e:
                raise ConfigError(str(e), key="procedure.kind") from e
        return configs

    # ------------------------------------------------------------------
    # Subcommands
    # ------------------------------------------------------------------

    def _sweep_distance(self, spec, scn, procedures, result, out) -> None:
        logger.info(
            "Sweeping %d distances at t_sig=%.3g s", len(scn.run.distances), scn.run.t_sig
        )
        for d, config, estimate in sweep_distance(
            scn, scn.run.distances, scn.run.t_sig, procedures
        ):
            result.rows.append(make_row(config, d, estimate, scn))
        write_rows(out, result.rows)

    def _sweep_tsig(self, spec, scn, procedures, result, out) -> None:
        for r_inner, r_outer in self._regions(spec, scn):
            ring = self._with_region(scn, r_inner, r_outer)
            note = self._region_note(r_inner, r_outer)
            for _, config, estimate in sweep_tsig(ring, scn.run.t_sig_grid, procedures):
                result.rows.append(make_row(config, r_outer, estimate, scn, note=note))
        write_rows(out, result.rows)

    def _min_tsig(self, spec, scn, procedures, result, out) -> None:
        run = scn.run
        for r_inner, r_outer in self._regions(spec, scn):
            trial_set = simulate_trials(scn, procedures, r_inner=r_inner, r_outer=r_outer)
            for index, config in enumerate(procedures):
                found = min_tsig_for_pmd(
                    scn,
                    run.target_pmd,
                    run.t_min,
                    run.t_max,
                    trial_set=trial_set,
                    index=index,
                )
                notes = [self._region_note(r_inner, r_outer)]
                if not found.reachable:
                    notes.append(f"unreachable: pmd >= {run.target_pmd:g} at t_max")
                    result.exit_code = EXIT_UNREACHABLE
                note = "; ".join(n for n in notes if n)
                result.rows.append(make_row(config, r_outer, found.estimate, scn, note=note))
        write_rows(out, result.rows)

    def _delay_table(self, spec, scn, procedures, result, out) -> None:
        rows = delay_table_rows(scn)
        if spec.simulate:
            configs = [row.config for row in rows]
            run = scn.run
            for d in TABLE_DISTANCES:
                trial_set = simulate_trials(scn, configs, r_inner=d, r_outer=d)
                for index, row in enumerate(rows):
                    row.simulated[d] = min_tsig_for_pmd(
                        scn,
                        run.target_pmd,
                        run.t_min,
                        run.t_max,
                        trial_set=trial_set,
                        index=index,
                    )
        result.delay_rows = rows
        write_delay_table(out, rows, simulated=spec.simulate)

    def _validate(self, spec, scn, procedures, result, out) -> None:
        result.checks = run_oracles(scn)
        out.write("check,expected,actual,result\n")
        for check in result.checks:
            out.write(
                f"{check.name},{check.expected:.6g},{check.actual:.6g},"
                f"{'pass' if check.passed else 'FAIL'}\n"
            )
        if not all(c.passed for c in result.checks):
            result.exit_code = EXIT_VALIDATION_FAILED

    # ------------------------------------------------------------------
    # Helpers
    # ------------------------------------------------------------------

    @staticmethod
    def _regions(spec: RunSpec, scn: ScenarioConfig) -> list[tuple[float, float]]:
        if spec.distances:
            bad = [d for d in spec.distances if d <= 0]
            if bad:
                raise ConfigError(f"distances must be positive, got {bad}", key="run.distances")
            return [(d, d) for d in spec.distances]
        return [(scn.run.r_inner, scn.run.r_outer)]

    @staticmethod
    def _with_region(scn: ScenarioConfig, r_inner: float, r_outer: float) -> ScenarioConfig:
        run = scn.run.model_copy(update={"r_inner": r_inner, "r_outer": r_outer})
        return scn.model_copy(update={"run": run})

    @staticmethod
    def _region_note(r_inner: float, r_outer: float) -> str:
        if r_inner == r_outer:
            return ""
        return f"annulus {r_inner:g}-{r_outer:g} m"

    @staticmethod
    def _write_output(text: str, path: Optional[str]) -> None:
        if path is None or path == "-":
            sys.stdout.write(text)
            sys.stdout.flush()
            return
        p = Path(path)
        p.parent.mkdir(parents=True, exist_ok=True)
        p.write_text(text, encoding="utf-8")
        logger.info("Wrote %s", p)
