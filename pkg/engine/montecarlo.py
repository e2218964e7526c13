"""
Monte Carlo estimation of misdetection probability (PMD).

A trial places the UE in an annulus around the BS, draws one channel
realization and runs every requested procedure on it (paired trials). Each
trial owns a Philox stream keyed by the scenario seed and offset by the trial
index, so results depend only on (config, seed) and never on how trials are
split across worker processes.

Procedures record a decision SNR per trial; the PMD at any signal duration is
the fraction of trials whose decision SNR plus integration gain falls below
tau. Sweeps over t_sig and the minimum-t_sig solver therefore reuse a single
set of realizations.
"""

from __future__ import annotations

import json
import logging
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass
from typing import Callable, Optional, Sequence

import numpy as np

from engine.channel import ChannelModel, integration_gain_db
from engine.models import (
    TWO_PI,
    LinkBudget,
    LinkState,
    MinTsigResult,
    OverheadPolicy,
    PmdEstimate,
    ProcedureConfig,
    ScenarioConfig,
)
from engine.procedures import build_procedure, discovery_delay, run_procedure, slot_count

logger = logging.getLogger(__name__)

CHUNK_SIZE = 4096
Z_95 = 1.96
BISECT_RELATIVE_WIDTH = 0.05


@dataclass
class SimulationTelemetry:
    """Per-batch metrics, logged as one JSON line."""

    trials: int
    chunks: int
    workers: int
    procedures: list[str]
    r_inner: float
    r_outer: float
    outage_fraction: float
    duration_ms: float


# ------------------------------------------------------------------
# Random streams + placement
# ------------------------------------------------------------------


def trial_rng(seed: int, trial_index: int) -> np.random.Generator:
    """Independent stream for one trial: Philox keyed by seed, counter block by index."""
    return np.random.Generator(
        np.random.Philox(key=seed, counter=[0, 0, 0, trial_index])
    )


def place_ue(
    r_inner: float, r_outer: float, rng: np.random.Generator
) -> tuple[float, float]:
    """Uniform-by-area position in the annulus; returns (distance, bearing)."""
    if r_inner <= 0 or r_inner > r_outer:
        raise ValueError(f"need 0 < r_inner <= r_outer, got {r_inner}, {r_outer}")
    bearing = rng.uniform(0.0, TWO_PI)
    u = rng.random()
    if r_inner == r_outer:
        return float(r_outer), float(bearing)
    distance = math.sqrt(u * (r_outer**2 - r_inner**2) + r_inner**2)
    return distance, float(bearing)


# ------------------------------------------------------------------
# Paired trial batches
# ------------------------------------------------------------------


@dataclass
class TrialSet:
    """Decision SNRs of paired trials, one row per procedure."""

    procedures: list[ProcedureConfig]
    decision_snr_db: np.ndarray
    outage: np.ndarray
    seed: int

    @property
    def trials(self) -> int:
        return int(self.outage.size)

    def misses(self, t_sig: float, budget: LinkBudget) -> np.ndarray:
        """Missed-trial count per procedure at signal duration ``t_sig``.

        Same rule as ``channel.detect``, applied to every stored decision SNR.
        """
        if t_sig < budget.t_ref:
            raise ValueError(f"t_sig={t_sig:g} s is below t_ref={budget.t_ref:g} s")
        gain = integration_gain_db(t_sig, budget)
        detected = self.decision_snr_db + gain >= budget.tau_db
        return (~detected).sum(axis=1)

    def estimate(self, index: int, t_sig: float, scn: ScenarioConfig) -> PmdEstimate:
        budget = scn.budget
        missed = int(self.misses(t_sig, budget)[index])
        n_slots = slot_count(self.procedures[index])
        policy = OverheadPolicy(t_sig=t_sig, phi_ov=scn.run.phi_ov)
        return make_estimate(missed, self.trials, n_slots, policy)


def make_estimate(
    misses: int, trials: int, n_slots: int, policy: OverheadPolicy
) -> PmdEstimate:
    pmd = misses / trials
    return PmdEstimate(
        pmd=pmd,
        trials=trials,
        misses=misses,
        ci95_halfwidth=Z_95 * math.sqrt(pmd * (1.0 - pmd) / trials),
        mean_delay_s=discovery_delay(n_slots, policy),
        t_sig_s=policy.t_sig,
        n_slots=n_slots,
    )


def _simulate_chunk(
    scn: ScenarioConfig,
    procedures: Sequence[ProcedureConfig],
    r_inner: float,
    r_outer: float,
    start: int,
    stop: int,
) -> tuple[np.ndarray, np.ndarray]:
    channel = ChannelModel(scn.channel)
    budget = scn.budget
    count = stop - start
    decision = np.full((len(procedures), count), -np.inf)
    outage = np.zeros(count, dtype=bool)

    for offset, trial in enumerate(range(start, stop)):
        rng = trial_rng(scn.run.seed, trial)
        distance, bearing = place_ue(r_inner, r_outer, rng)
        ch = channel.sample_realization(distance, bearing, rng)
        if ch.state == LinkState.OUTAGE:
            outage[offset] = True
            continue
        for row, config in enumerate(procedures):
            outcome = run_procedure(ch, config, budget, budget.t_ref)
            decision[row, offset] = outcome.decision_snr_db
    return decision, outage


def simulate_trials(
    scn: ScenarioConfig,
    procedures: Optional[Sequence[ProcedureConfig]] = None,
    r_inner: Optional[float] = None,
    r_outer: Optional[float] = None,
) -> TrialSet:
    """Run ``scn.run.trials`` paired trials for every procedure.

    Chunks are fixed-size and concatenated in trial order, so the result is
    the same for any worker count.
    """
    if procedures is None:
        procedures = [build_procedure(scn.procedure)]
    procedures = list(procedures)
    r_inner = scn.run.r_inner if r_inner is None else r_inner
    r_outer = scn.run.r_outer if r_outer is None else r_outer

    trials = scn.run.trials
    bounds = [(s, min(s + CHUNK_SIZE, trials)) for s in range(0, trials, CHUNK_SIZE)]
    workers = min(scn.run.workers, len(bounds))
    start_time = time.monotonic()

    if workers <= 1:
        parts = [
            _simulate_chunk(scn, procedures, r_inner, r_outer, s, e) for s, e in bounds
        ]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            futures = [
                pool.submit(_simulate_chunk, scn, procedures, r_inner, r_outer, s, e)
                for s, e in bounds
            ]
            parts = [f.result() for f in futures]

    decision = np.concatenate([p[0] for p in parts], axis=1)
    outage = np.concatenate([p[1] for p in parts])

    telemetry = SimulationTelemetry(
        trials=trials,
        chunks=len(bounds),
        workers=workers,
        procedures=[f"{p.label} {p.bs_antennas}x{p.ue_antennas}" for p in procedures],
        r_inner=r_inner,
        r_outer=r_outer,
        outage_fraction=round(float(outage.mean()), 6),
        duration_ms=round((time.monotonic() - start_time) * 1000, 2),
    )
    logger.info("simulation_telemetry %s", json.dumps(asdict(telemetry)))
    return TrialSet(
        procedures=procedures, decision_snr_db=decision, outage=outage, seed=scn.run.seed
    )


# ------------------------------------------------------------------
# Estimators + sweeps
# ------------------------------------------------------------------


def estimate_pmd(
    scn: ScenarioConfig,
    t_sig: float,
    procedure: Optional[ProcedureConfig] = None,
) -> PmdEstimate:
    """Miss fraction of the scenario's procedure at ``t_sig``."""
    if t_sig < scn.budget.t_ref:
        raise ValueError(f"t_sig={t_sig:g} s is below t_ref={scn.budget.t_ref:g} s")
    procedures = None if procedure is None else [procedure]
    return simulate_trials(scn, procedures).estimate(0, t_sig, scn)


def estimate_pmd_paired(
    scn: ScenarioConfig,
    procedures: Sequence[ProcedureConfig],
    t_sig: float,
) -> list[PmdEstimate]:
    """PMD of several procedures over the same channel realizations."""
    trial_set = simulate_trials(scn, procedures)
    return [trial_set.estimate(i, t_sig, scn) for i in range(len(procedures))]


def sweep_distance(
    scn: ScenarioConfig,
    distances: Sequence[float],
    t_sig: float,
    procedures: Optional[Sequence[ProcedureConfig]] = None,
) -> list[tuple[float, ProcedureConfig, PmdEstimate]]:
    """PMD on rings of radius d (R1 = R2 = d), one row per distance per procedure."""
    if not distances:
        raise ValueError("distance list must not be empty")
    rows = []
    for d in distances:
        trial_set = simulate_trials(scn, procedures, r_inner=d, r_outer=d)
        for i, config in enumerate(trial_set.procedures):
            rows.append((float(d), config, trial_set.estimate(i, t_sig, scn)))
    return rows


def sweep_tsig(
    scn: ScenarioConfig,
    t_sig_grid: Sequence[float],
    procedures: Optional[Sequence[ProcedureConfig]] = None,
) -> list[tuple[float, ProcedureConfig, PmdEstimate]]:
    """PMD per grid point at constant overhead (T_per = t_sig / phi_ov)."""
    if not t_sig_grid:
        raise ValueError("t_sig grid must not be empty")
    too_short = [t for t in t_sig_grid if t < scn.budget.t_ref]
    if too_short:
        raise ValueError(f"t_sig values {too_short} are below t_ref={scn.budget.t_ref:g} s")
    trial_set = simulate_trials(scn, procedures)
    rows = []
    for t_sig in t_sig_grid:
        for i, config in enumerate(trial_set.procedures):
            rows.append((float(t_sig), config, trial_set.estimate(i, t_sig, scn)))
    return rows


# ------------------------------------------------------------------
# Minimum signal duration
# ------------------------------------------------------------------


def bisect_min_tsig(
    pmd_fn: Callable[[float], float],
    target_pmd: float,
    t_min: float,
    t_max: float,
    relative_width: float = BISECT_RELATIVE_WIDTH,
) -> Optional[float]:
    """Smallest t in [t_min, t_max] with pmd_fn(t) < target, or None if unreachable.

    Assumes pmd_fn is non-increasing. Bisects geometrically until
    hi / lo <= 1 + relative_width and returns hi.
    """
    if not 0.0 < target_pmd < 1.0:
        raise ValueError(f"target_pmd must be in (0, 1), got {target_pmd}")
    if t_min <= 0 or t_min > t_max:
        raise ValueError(f"invalid bracket [{t_min}, {t_max}]")

    if pmd_fn(t_min) < target_pmd:
        return t_min
    if pmd_fn(t_max) >= target_pmd:
        return None

    lo, hi = t_min, t_max
    while hi / lo > 1.0 + relative_width:
        mid = math.sqrt(lo * hi)
        if pmd_fn(mid) < target_pmd:
            hi = mid
        else:
            lo = mid
    return hi


def min_tsig_for_pmd(
    scn: ScenarioConfig,
    target_pmd: float,
    t_min: float,
    t_max: float,
    procedure: Optional[ProcedureConfig] = None,
    trial_set: Optional[TrialSet] = None,
    index: int = 0,
) -> MinTsigResult:
    """Shortest PSS meeting PMD < target for the scenario's procedure."""
    if t_min < scn.budget.t_ref:
        raise ValueError(f"t_min={t_min:g} s is below t_ref={scn.budget.t_ref:g} s")
    if t_min > t_max:
        raise ValueError(f"inverted bracket: t_min={t_min:g} s > t_max={t_max:g} s")
    if trial_set is None:
        procedures = None if procedure is None else [procedure]
        trial_set = simulate_trials(scn, procedures)
        index = 0

    t_sig = bisect_min_tsig(
        lambda t: trial_set.estimate(index, t, scn).pmd, target_pmd, t_min, t_max
    )
    if t_sig is None:
        logger.warning(
            "PMD target %.3g unreachable below t_sig=%.3g s", target_pmd, t_max
        )
        return MinTsigResult(
            reachable=False, t_sig_s=t_max, estimate=trial_set.estimate(index, t_max, scn)
        )
    return MinTsigResult(
        reachable=True, t_sig_s=t_sig, estimate=trial_set.estimate(index, t_sig, scn)
    )
