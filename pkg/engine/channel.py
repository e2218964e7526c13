"""
ChannelModel – statistical 28 GHz dense-urban link model.

Per trial a link is LOS, NLOS or in outage. Non-outage links get a
distance-dependent pathloss with log-normal shadowing and a small set of
spatial clusters, each with a departure azimuth at the BS, an arrival
azimuth at the UE and a share of the received power. Beam-pair gain, SNR and
the PSS detection rule are evaluated on top of a realization.

All sampling goes through an explicit ``numpy.random.Generator``; nothing
here holds mutable state.
"""

from __future__ import annotations

import logging
import math

import numpy as np

from engine.beams import beam_gain, codebook_gains, wrap_angle
from engine.models import (
    TWO_PI,
    BeamCodeword,
    ChannelParams,
    ChannelRealization,
    Codebook,
    LinkBudget,
    LinkState,
    PathCluster,
)

logger = logging.getLogger(__name__)


def _require_link(state: LinkState) -> None:
    if state == LinkState.OUTAGE:
        raise ValueError("outage links have no pathloss, clusters or SNR")


class ChannelModel:
    """Samples link state, pathloss and clusters from ``ChannelParams``."""

    def __init__(self, params: ChannelParams | None = None) -> None:
        self._params = params or ChannelParams()

    @property
    def params(self) -> ChannelParams:
        return self._params

    # ------------------------------------------------------------------
    # Link state
    # ------------------------------------------------------------------

    def link_state_probabilities(self, d: float) -> tuple[float, float, float]:
        """Return (p_out, p_los, p_nlos) at distance ``d`` meters."""
        if d <= 0:
            raise ValueError(f"distance must be positive, got {d}")
        p = self._params
        p_out = max(0.0, 1.0 - math.exp(-p.a_out * d + p.b_out))
        p_los = (1.0 - p_out) * math.exp(-p.a_los * d)
        p_nlos = max(0.0, 1.0 - p_out - p_los)
        return p_out, p_los, p_nlos

    def sample_state(self, d: float, rng: np.random.Generator) -> LinkState:
        """Categorical draw ordered LOS, NLOS, OUTAGE on one uniform.

        With a shared uniform, a longer distance can only move a trial
        towards NLOS and then outage.
        """
        _, p_los, p_nlos = self.link_state_probabilities(d)
        u = rng.random()
        if u < p_los:
            return LinkState.LOS
        if u < p_los + p_nlos:
            return LinkState.NLOS
        return LinkState.OUTAGE

    # ------------------------------------------------------------------
    # Pathloss
    # ------------------------------------------------------------------

    def pathloss_db(self, d: float, state: LinkState, rng: np.random.Generator) -> float:
        """Pathloss in dB including shadowing (one standard normal per call)."""
        _require_link(state)
        if d < 1.0:
            raise ValueError(f"pathloss is defined for d >= 1 m, got {d}")
        p = self._params
        if state == LinkState.LOS:
            intercept, slope, sigma = p.los_intercept_db, p.los_slope_db, p.los_sigma_db
        else:
            intercept, slope, sigma = p.nlos_intercept_db, p.nlos_slope_db, p.nlos_sigma_db
        shadow = sigma * rng.standard_normal() if p.shadowing else 0.0
        return intercept + slope * math.log10(d) + shadow

    # ------------------------------------------------------------------
    # Spatial clusters
    # ------------------------------------------------------------------

    def sample_clusters(
        self,
        state: LinkState,
        rng: np.random.Generator,
        bearing: float = 0.0,
    ) -> tuple[PathCluster, ...]:
        """Draw clusters for a non-outage link whose UE sits at ``bearing`` from the BS."""
        _require_link(state)
        p = self._params
        direct_aod = wrap_angle(bearing)
        direct_aoa = wrap_angle(bearing + math.pi)

        if state == LinkState.LOS and p.los_deterministic_angle:
            return (PathCluster(power_fraction=1.0, aod=direct_aod, aoa=direct_aoa),)

        count = max(int(rng.poisson(p.cluster_rate)), 1)
        weights = rng.exponential(1.0, size=count)
        fractions = weights / weights.sum()

        if p.nlos_angle_spread_deg is None:
            aods = rng.uniform(0.0, TWO_PI, size=count)
            aoas = rng.uniform(0.0, TWO_PI, size=count)
        else:
            spread = math.radians(p.nlos_angle_spread_deg)
            aods = direct_aod + rng.uniform(-spread, spread, size=count)
            aoas = direct_aoa + rng.uniform(-spread, spread, size=count)

        return tuple(
            PathCluster(
                power_fraction=float(f),
                aod=wrap_angle(float(a)),
                aoa=wrap_angle(float(b)),
            )
            for f, a, b in zip(fractions, aods, aoas)
        )

    # ------------------------------------------------------------------
    # Full realization
    # ------------------------------------------------------------------

    def sample_realization(
        self, d: float, bearing: float, rng: np.random.Generator
    ) -> ChannelRealization:
        """State, then pathloss, then clusters, all from ``rng`` in that order."""
        state = self.sample_state(d, rng)
        if state == LinkState.OUTAGE:
            return ChannelRealization(
                state=state,
                pathloss_db=math.inf,
                clusters=(),
                distance_m=d,
                bearing=bearing,
            )
        # Placement inside a thin inner ring can land below 1 m
        pathloss = self.pathloss_db(max(d, 1.0), state, rng)
        clusters = self.sample_clusters(state, rng, bearing=bearing)
        return ChannelRealization(
            state=state,
            pathloss_db=pathloss,
            clusters=clusters,
            distance_m=d,
            bearing=bearing,
        )


# ------------------------------------------------------------------
# Link evaluation
# ------------------------------------------------------------------


def pair_gain(ch: ChannelRealization, tx: BeamCodeword, rx: BeamCodeword) -> float:
    """Σ_k fraction_k · G_tx(aod_k) · G_rx(aoa_k)."""
    _require_link(ch.state)
    return sum(
        c.power_fraction * beam_gain(tx, c.aod) * beam_gain(rx, c.aoa)
        for c in ch.clusters
    )


def pair_gain_matrix(ch: ChannelRealization, tx: Codebook, rx: Codebook) -> np.ndarray:
    """``pair_gain`` for every (tx, rx) codeword pair, shape (len(tx), len(rx))."""
    _require_link(ch.state)
    fractions = np.array([c.power_fraction for c in ch.clusters])
    tx_gains = codebook_gains(tx, np.array([c.aod for c in ch.clusters]))
    rx_gains = codebook_gains(rx, np.array([c.aoa for c in ch.clusters]))
    return (tx_gains * fractions) @ rx_gains.T


def snr_db(budget: LinkBudget, ch: ChannelRealization, gain: float | np.ndarray):
    """Downlink SNR of a beam pair with linear gain ``gain`` (scalar or array)."""
    _require_link(ch.state)
    return budget.ptx_dbm + 10.0 * np.log10(gain) - ch.pathloss_db - budget.noise_floor_dbm


def ul_snr_db(budget: LinkBudget, ch: ChannelRealization, gain: float | np.ndarray):
    """Uplink SNR over the same (reciprocal) beam pair at the UE transmit power."""
    return snr_db(budget, ch, gain) - (budget.ptx_dbm - budget.ul_ptx_dbm)


def integration_gain_db(t_sig: float, budget: LinkBudget) -> float:
    return 10.0 * math.log10(t_sig / budget.t_ref)


def detect(snr: float, t_sig: float, budget: LinkBudget) -> bool:
    """PSS detected iff snr + 10·log10(t_sig / t_ref) >= tau (boundary inclusive)."""
    if t_sig < budget.t_ref:
        raise ValueError(
            f"t_sig={t_sig:g} s is shorter than the minimum duration t_ref={budget.t_ref:g} s"
        )
    return snr + integration_gain_db(t_sig, budget) >= budget.tau_db
