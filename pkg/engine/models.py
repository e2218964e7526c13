"""
Data models for the mm-Wave initial-access simulator.

Configuration and result models are pydantic (they are parsed from and
serialised to files); the objects touched once per Monte Carlo trial
(codewords, codebooks, channel realizations, search outcomes) are frozen
dataclasses.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

TWO_PI = 2.0 * math.pi


# ------------------------------------------------------------------
# Enums
# ------------------------------------------------------------------


class LinkState(str, Enum):
    LOS = "los"
    NLOS = "nlos"
    OUTAGE = "outage"


class ProcedureKind(str, Enum):
    EXHAUSTIVE = "exhaustive"
    ITERATIVE = "iterative"
    PURE_CI = "pure-ci"
    ENHANCED_CI = "enhanced-ci"

    @property
    def is_ci(self) -> bool:
        return self in (ProcedureKind.PURE_CI, ProcedureKind.ENHANCED_CI)


class Subcommand(str, Enum):
    SWEEP_DISTANCE = "sweep-distance"
    SWEEP_TSIG = "sweep-tsig"
    MIN_TSIG = "min-tsig"
    TABLE3 = "table3"
    VALIDATE = "validate"


# ------------------------------------------------------------------
# Antenna array + beams
# ------------------------------------------------------------------


class ArrayGeometry(BaseModel):
    """Uniform planar array; only the element count matters for gain."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    rows: int = Field(default=8, ge=1)
    cols: int = Field(default=8, ge=1)
    element_spacing: float = Field(default=0.5, gt=0.0)

    @property
    def size(self) -> int:
        return self.rows * self.cols


@dataclass(frozen=True)
class BeamCodeword:
    center_azimuth: float
    beamwidth: float
    active_elements: int
    mainlobe_gain: float
    sidelobe_gain: float = 0.01
    # position k in a codebook of n_directions beams rotated by origin
    index: int = 0
    n_directions: int = 1
    origin: float = 0.0


@dataclass(frozen=True)
class Codebook:
    """Beams steered to origin + 2πk/N, k = 0..N-1, tiling the azimuth circle."""

    codewords: tuple[BeamCodeword, ...]
    centers: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        object.__setattr__(
            self,
            "centers",
            np.array([cw.center_azimuth for cw in self.codewords], dtype=float),
        )

    @property
    def size(self) -> int:
        return len(self.codewords)

    @property
    def beamwidth(self) -> float:
        return self.codewords[0].beamwidth

    @property
    def origin(self) -> float:
        return self.codewords[0].origin

    @property
    def active_elements(self) -> int:
        return self.codewords[0].active_elements

    @property
    def mainlobe_gain(self) -> float:
        return self.codewords[0].mainlobe_gain

    @property
    def sidelobe_gain(self) -> float:
        return self.codewords[0].sidelobe_gain

    def __len__(self) -> int:
        return len(self.codewords)

    def __getitem__(self, index: int) -> BeamCodeword:
        return self.codewords[index]


# ------------------------------------------------------------------
# Channel
# ------------------------------------------------------------------


@dataclass(frozen=True)
class PathCluster:
    power_fraction: float
    aod: float
    aoa: float


@dataclass(frozen=True)
class ChannelRealization:
    state: LinkState
    pathloss_db: float
    clusters: tuple[PathCluster, ...]
    distance_m: float
    # UE azimuth as seen from the BS
    bearing: float = 0.0

    @property
    def bs_direction(self) -> float:
        """Azimuth of the BS as seen from the UE (the CI steering target)."""
        return (self.bearing + math.pi) % TWO_PI


class LinkBudget(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    ptx_dbm: float = 30.0
    ul_ptx_dbm: float = 23.0
    bandwidth_hz: float = Field(default=1e9, gt=0.0)
    noise_figure_db: float = 5.0
    carrier_ghz: float = Field(default=28.0, gt=0.0)
    tau_db: float = -5.0
    t_ref: float = Field(default=10e-6, gt=0.0)

    @property
    def noise_floor_dbm(self) -> float:
        return -174.0 + 10.0 * math.log10(self.bandwidth_hz) + self.noise_figure_db


class ChannelParams(BaseModel):
    """Statistical 28 GHz dense-urban channel constants (all overridable)."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    a_out: float = Field(default=1.0 / 30.0, ge=0.0)
    b_out: float = 5.2
    a_los: float = Field(default=1.0 / 67.1, ge=0.0)
    los_intercept_db: float = 61.4
    los_slope_db: float = 20.0
    los_sigma_db: float = Field(default=5.8, ge=0.0)
    nlos_intercept_db: float = 72.0
    nlos_slope_db: float = 29.2
    nlos_sigma_db: float = Field(default=8.7, ge=0.0)
    cluster_rate: float = Field(default=1.9, ge=0.0)
    shadowing: bool = True
    los_deterministic_angle: bool = True
    # None keeps NLOS cluster angles uniform over the circle
    nlos_angle_spread_deg: Optional[float] = Field(default=None, gt=0.0, le=180.0)


# ------------------------------------------------------------------
# Procedures
# ------------------------------------------------------------------


class ProcedureSpec(BaseModel):
    """What the config file says about the search scheme and its arrays."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    kind: ProcedureKind = ProcedureKind.EXHAUSTIVE
    ue_beams: int = 8
    ci_half_window: Optional[int] = Field(default=None, ge=0)
    bs_rows: int = Field(default=8, ge=1)
    bs_cols: int = Field(default=8, ge=1)
    bs_beams: int = Field(default=16, ge=1)
    wide_beams: int = Field(default=4, ge=1)
    wide_active: int = Field(default=4, ge=1)
    sidelobe_gain: float = Field(default=0.01, gt=0.0, lt=1.0)
    require_uplink: bool = False

    @field_validator("ue_beams")
    @classmethod
    def _ue_beams_supported(cls, v: int) -> int:
        if v not in (4, 8):
            raise ValueError("ue_beams must be 4 (2x2 array) or 8 (4x4 array)")
        return v

    @property
    def half_window(self) -> int:
        if self.ci_half_window is not None:
            return self.ci_half_window
        return 1 if self.kind == ProcedureKind.ENHANCED_CI else 0


@dataclass(frozen=True)
class ProcedureConfig:
    kind: ProcedureKind
    bs_narrow: Codebook
    ue_codebook: Codebook
    bs_wide: Optional[Codebook] = None
    ci_half_window: int = 0
    require_uplink: bool = False

    def __post_init__(self) -> None:
        if self.kind == ProcedureKind.ITERATIVE:
            if self.bs_wide is None:
                raise ValueError("iterative search needs a wide BS codebook")
            if self.bs_narrow.size % self.bs_wide.size:
                raise ValueError(
                    f"narrow codebook size {self.bs_narrow.size} is not a multiple "
                    f"of wide codebook size {self.bs_wide.size}"
                )
        if self.kind == ProcedureKind.PURE_CI and self.ci_half_window != 0:
            raise ValueError("pure-ci uses the single CI-selected UE beam (half window 0)")
        if self.kind == ProcedureKind.ENHANCED_CI and self.ci_half_window < 1:
            raise ValueError("enhanced-ci needs ci_half_window >= 1")
        if self.kind.is_ci and 2 * self.ci_half_window + 1 > self.ue_codebook.size:
            raise ValueError(
                f"CI window of {2 * self.ci_half_window + 1} beams exceeds the "
                f"{self.ue_codebook.size}-beam UE codebook"
            )

    @property
    def label(self) -> str:
        return self.kind.value

    @property
    def bs_antennas(self) -> int:
        return self.bs_narrow.active_elements

    @property
    def ue_antennas(self) -> int:
        return self.ue_codebook.active_elements


class OverheadPolicy(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    t_sig: float = Field(default=10e-6, gt=0.0)
    phi_ov: float = 0.05

    @field_validator("phi_ov")
    @classmethod
    def _phi_in_range(cls, v: float) -> float:
        if not 0.0 < v <= 1.0:
            raise ValueError("phi_ov must be in (0,1]")
        return v

    @property
    def t_per(self) -> float:
        return self.t_sig / self.phi_ov


@dataclass(frozen=True)
class SearchOutcome:
    kind: ProcedureKind
    detected: bool
    n_slots: int
    best_bs_beam: Optional[int] = None
    best_ue_beam: Optional[int] = None
    best_snr_db: Optional[float] = None
    # Weakest t_ref-normalized SNR that had to clear tau (-inf on outage)
    decision_snr_db: float = float("-inf")


# ------------------------------------------------------------------
# Scenario
# ------------------------------------------------------------------


def _default_distances() -> list[float]:
    return [float(d) for d in range(10, 201, 10)]


def _default_tsig_grid() -> list[float]:
    return [float(t) for t in np.geomspace(10e-6, 3e-3, 10)]


class RunParams(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    trials: int = Field(default=50_000, ge=1)
    seed: int = Field(default=1, ge=0, lt=2**64)
    workers: int = Field(default=1, ge=1)
    r_inner: float = Field(default=95.0, gt=0.0)
    r_outer: float = Field(default=95.0, gt=0.0)
    t_sig: float = Field(default=10e-6, gt=0.0)
    phi_ov: float = 0.05
    target_pmd: float = Field(default=0.01, gt=0.0, lt=1.0)
    t_min: float = Field(default=10e-6, gt=0.0)
    t_max: float = Field(default=3.16e-3, gt=0.0)
    distances: list[float] = Field(default_factory=_default_distances, min_length=1)
    t_sig_grid: list[float] = Field(default_factory=_default_tsig_grid, min_length=1)

    @field_validator("phi_ov")
    @classmethod
    def _phi_in_range(cls, v: float) -> float:
        if not 0.0 < v <= 1.0:
            raise ValueError("phi_ov must be in (0,1]")
        return v

    @field_validator("distances")
    @classmethod
    def _distances_positive(cls, v: list[float]) -> list[float]:
        if any(d <= 0 for d in v):
            raise ValueError("distances must be positive")
        return v

    @model_validator(mode="after")
    def _check_ranges(self) -> "RunParams":
        if self.r_inner > self.r_outer:
            raise ValueError("r_inner must not exceed r_outer")
        if self.t_min > self.t_max:
            raise ValueError("t_min must not exceed t_max")
        return self


class ScenarioConfig(BaseModel):
    """Everything one experiment needs; mirrors the config file namespaces."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    budget: LinkBudget = Field(default_factory=LinkBudget)
    channel: ChannelParams = Field(default_factory=ChannelParams)
    procedure: ProcedureSpec = Field(default_factory=ProcedureSpec)
    run: RunParams = Field(default_factory=RunParams)

    @model_validator(mode="after")
    def _tsig_above_reference(self) -> "ScenarioConfig":
        for name in ("t_sig", "t_min"):
            if getattr(self.run, name) < self.budget.t_ref:
                raise ValueError(
                    f"run.{name} must be at least budget.t_ref ({self.budget.t_ref:g} s)"
                )
        if any(t < self.budget.t_ref for t in self.run.t_sig_grid):
            raise ValueError("run.t_sig_grid values must be at least budget.t_ref")
        return self

    @property
    def policy(self) -> OverheadPolicy:
        return OverheadPolicy(t_sig=self.run.t_sig, phi_ov=self.run.phi_ov)


# ------------------------------------------------------------------
# Result models
# ------------------------------------------------------------------


class PmdEstimate(BaseModel):
    pmd: float = 0.0
    trials: int = 0
    misses: int = 0
    ci95_halfwidth: float = 0.0
    mean_delay_s: float = 0.0
    t_sig_s: float = 0.0
    n_slots: int = 0


class MinTsigResult(BaseModel):
    reachable: bool = True
    t_sig_s: float = 0.0
    estimate: Optional[PmdEstimate] = None


class ResultRow(BaseModel):
    procedure: str = ""
    bs_antennas: int = 0
    ue_antennas: int = 0
    n_slots: int = 0
    distance_m: float = 0.0
    t_sig_s: float = 0.0
    phi_ov: float = 0.05
    pmd: Optional[float] = None
    ci95: Optional[float] = None
    delay_s: float = 0.0
    seed: int = 0
    trials: int = 0
    note: str = ""


class RunSpec(BaseModel):
    subcommand: Subcommand
    config_path: Optional[str] = None
    # None writes to standard output
    output_path: Optional[str] = None
    seed_override: Optional[int] = None
    trials_override: Optional[int] = None
    workers_override: Optional[int] = None
    procedures: list[ProcedureKind] = Field(default_factory=list)
    ue_beams: list[int] = Field(default_factory=list)
    distances: list[float] = Field(default_factory=list)
    t_sigs: list[float] = Field(default_factory=list)
    target_pmd: Optional[float] = None
    simulate: bool = False
