"""
Initial-access cell search procedures.

Each procedure sweeps a fixed sequence of (BS beam, UE beam) slots over one
channel realization and reports whether the UE detected a PSS, which pair
it settled on, and how many slots the frame used. The frame length does not
depend on the outcome.

Besides ``detected`` every outcome carries ``decision_snr_db``: the weakest
t_ref-normalized SNR that had to clear the threshold along the search. The
same search detects at any signal duration t iff
``detect(decision_snr_db, t, budget)``, which lets the Monte Carlo layer
re-threshold one set of trials over a whole t_sig grid.
"""

from __future__ import annotations

import logging
from typing import Optional

import numpy as np

from engine.beams import (
    adjacent_beams,
    best_beam_for_bearing,
    make_codebook,
    make_wide_codebook,
    refinement_beams,
)
from engine.channel import detect, pair_gain_matrix, snr_db, ul_snr_db
from engine.models import (
    ArrayGeometry,
    ChannelRealization,
    LinkBudget,
    LinkState,
    OverheadPolicy,
    ProcedureConfig,
    ProcedureKind,
    ProcedureSpec,
    SearchOutcome,
)

logger = logging.getLogger(__name__)

UE_ARRAYS: dict[int, ArrayGeometry] = {
    4: ArrayGeometry(rows=2, cols=2),
    8: ArrayGeometry(rows=4, cols=4),
}


# ------------------------------------------------------------------
# Construction
# ------------------------------------------------------------------


def build_procedure(spec: ProcedureSpec) -> ProcedureConfig:
    """Codebooks for one scheme: BS narrow/wide beams and the UE sweep."""
    bs_array = ArrayGeometry(rows=spec.bs_rows, cols=spec.bs_cols)
    ue_array = UE_ARRAYS[spec.ue_beams]
    bs_narrow = make_codebook(
        bs_array, spec.bs_beams, bs_array.size, sidelobe_gain=spec.sidelobe_gain
    )
    ue_codebook = make_codebook(
        ue_array, spec.ue_beams, ue_array.size, sidelobe_gain=spec.sidelobe_gain
    )
    bs_wide = None
    if spec.kind == ProcedureKind.ITERATIVE:
        bs_wide = make_wide_codebook(
            bs_array, bs_narrow, spec.wide_beams, spec.wide_active, sidelobe_gain=spec.sidelobe_gain
        )
    return ProcedureConfig(
        kind=spec.kind,
        bs_narrow=bs_narrow,
        ue_codebook=ue_codebook,
        bs_wide=bs_wide,
        ci_half_window=spec.half_window if spec.kind.is_ci else 0,
        require_uplink=spec.require_uplink,
    )


# ------------------------------------------------------------------
# Slot and delay accounting
# ------------------------------------------------------------------


def slot_count(config: ProcedureConfig) -> int:
    """Slots in one cell-search frame: downlink sweep plus uplink BS sweep."""
    n_bs = config.bs_narrow.size
    n_ue = config.ue_codebook.size
    kind = config.kind

    if kind == ProcedureKind.EXHAUSTIVE:
        return n_bs * n_ue + n_bs
    if kind == ProcedureKind.ITERATIVE:
        n_wide = config.bs_wide.size
        n_refine = n_bs // n_wide
        downlink = n_wide * n_ue + n_refine
        uplink = n_wide + n_refine
        return downlink + uplink
    if kind.is_ci:
        return n_bs * (2 * config.ci_half_window + 1) + n_bs
    raise ValueError(f"unknown procedure kind {kind!r}")


def discovery_delay(n_slots: int, policy: OverheadPolicy) -> float:
    """N_s · T_per = N_s · T_sig / φ_ov."""
    return n_slots * policy.t_sig / policy.phi_ov


# ------------------------------------------------------------------
# Shared helpers
# ------------------------------------------------------------------


def _missed(config: ProcedureConfig) -> SearchOutcome:
    return SearchOutcome(kind=config.kind, detected=False, n_slots=slot_count(config))


def _argmax_pair(snr: np.ndarray) -> tuple[int, int]:
    # Row-major first maximum: lowest BS index, then lowest UE index
    flat = int(np.argmax(snr))
    return divmod(flat, snr.shape[1])


def _finish(
    config: ProcedureConfig,
    ch: ChannelRealization,
    budget: LinkBudget,
    t_sig: float,
    bs_beam: int,
    ue_beam: int,
    pair_snr: float,
    decision_snr: float,
    pair_gain: float,
) -> SearchOutcome:
    if config.require_uplink:
        decision_snr = min(decision_snr, float(ul_snr_db(budget, ch, pair_gain)))
    detected = detect(decision_snr, t_sig, budget)
    return SearchOutcome(
        kind=config.kind,
        detected=detected,
        n_slots=slot_count(config),
        best_bs_beam=bs_beam if detected else None,
        best_ue_beam=ue_beam if detected else None,
        best_snr_db=pair_snr if detected else None,
        decision_snr_db=decision_snr,
    )


# ------------------------------------------------------------------
# Procedures
# ------------------------------------------------------------------


def run_exhaustive(
    ch: ChannelRealization,
    config: ProcedureConfig,
    budget: LinkBudget,
    t_sig: float,
) -> SearchOutcome:
    """Sweep every (BS narrow beam, UE beam) pair; keep the strongest."""
    if ch.state == LinkState.OUTAGE:
        return _missed(config)

    gains = pair_gain_matrix(ch, config.bs_narrow, config.ue_codebook)
    snr = snr_db(budget, ch, gains)
    bs_beam, ue_beam = _argmax_pair(snr)
    best = float(snr[bs_beam, ue_beam])
    return _finish(
        config, ch, budget, t_sig, bs_beam, ue_beam, best, best, float(gains[bs_beam, ue_beam])
    )


def run_iterative(
    ch: ChannelRealization,
    config: ProcedureConfig,
    budget: LinkBudget,
    t_sig: float,
) -> SearchOutcome:
    """Wide macro sectors first, then narrow beams inside the best sector.

    The UE beam found in the first phase stays fixed for the refinement.
    A first phase that picks a sector whose narrow beams all fail is a miss;
    other sectors are not retried.
    """
    if config.bs_wide is None:
        raise ValueError("iterative search needs a wide BS codebook")
    if ch.state == LinkState.OUTAGE:
        return _missed(config)

    wide_snr = snr_db(budget, ch, pair_gain_matrix(ch, config.bs_wide, config.ue_codebook))
    sector, ue_beam = _argmax_pair(wide_snr)
    best_wide = float(wide_snr[sector, ue_beam])

    candidates = refinement_beams(config.bs_narrow, config.bs_wide, sector)
    narrow_gains = pair_gain_matrix(ch, config.bs_narrow, config.ue_codebook)[
        candidates, ue_beam
    ]
    narrow_snr = snr_db(budget, ch, narrow_gains)
    # candidates are not sorted across the wrap; pick the strongest, then lowest index
    order = sorted(range(len(candidates)), key=lambda i: (-narrow_snr[i], candidates[i]))
    pick = order[0]
    best_narrow = float(narrow_snr[pick])

    logger.debug(
        "iterative: sector %d ue %d wide %.1f dB -> narrow %d %.1f dB",
        sector,
        ue_beam,
        best_wide,
        candidates[pick],
        best_narrow,
    )
    return _finish(
        config,
        ch,
        budget,
        t_sig,
        candidates[pick],
        ue_beam,
        best_narrow,
        min(best_wide, best_narrow),
        float(narrow_gains[pick]),
    )


def run_ci(
    ch: ChannelRealization,
    config: ProcedureConfig,
    budget: LinkBudget,
    t_sig: float,
    true_bearing: float,
) -> SearchOutcome:
    """UE points at the known BS direction (plus neighbours); BS sweeps all beams.

    ``true_bearing`` is the azimuth of the BS as seen from the UE.
    """
    if not config.kind.is_ci:
        raise ValueError(f"run_ci needs a CI procedure, got {config.kind.value}")
    if ch.state == LinkState.OUTAGE:
        return _missed(config)

    centre = best_beam_for_bearing(config.ue_codebook, true_bearing)
    ue_beams = sorted(adjacent_beams(config.ue_codebook, centre, config.ci_half_window))
    gains = pair_gain_matrix(ch, config.bs_narrow, config.ue_codebook)[:, ue_beams]
    snr = snr_db(budget, ch, gains)
    bs_beam, column = _argmax_pair(snr)
    best = float(snr[bs_beam, column])
    return _finish(
        config,
        ch,
        budget,
        t_sig,
        bs_beam,
        ue_beams[column],
        best,
        best,
        float(gains[bs_beam, column]),
    )


def run_procedure(
    ch: ChannelRealization,
    config: ProcedureConfig,
    budget: LinkBudget,
    t_sig: float,
    true_bearing: Optional[float] = None,
) -> SearchOutcome:
    """Dispatch on ``config.kind``; CI kinds default to the realization's BS direction."""
    if config.kind == ProcedureKind.EXHAUSTIVE:
        return run_exhaustive(ch, config, budget, t_sig)
    if config.kind == ProcedureKind.ITERATIVE:
        return run_iterative(ch, config, budget, t_sig)
    bearing = ch.bs_direction if true_bearing is None else true_bearing
    return run_ci(ch, config, budget, t_sig, bearing)


def procedure_label(config: ProcedureConfig) -> str:
    """Human label in the "<scheme> <BS>x<UE>" form, e.g. "exhaustive 64x16"."""
    return f"{config.label} {config.bs_antennas}x{config.ue_antennas}"
