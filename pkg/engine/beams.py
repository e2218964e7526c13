"""
Analog beam codebooks for uniform planar arrays.

Beams are flat-top azimuth sectors: a codeword returns its mainlobe gain
(the number of coherently combined active elements) inside
[center - bw/2, center + bw/2) and a constant sidelobe floor elsewhere.
The half-open interval makes the N sectors of a codebook tile the circle,
so every azimuth falls in exactly one mainlobe.
"""

from __future__ import annotations

import logging
import math

import numpy as np

from engine.models import TWO_PI, ArrayGeometry, BeamCodeword, Codebook

logger = logging.getLogger(__name__)

DEFAULT_SIDELOBE_GAIN = 0.01
# Ties in angular distance closer than this are resolved to the lower index
_TIE_TOLERANCE = 1e-12


def wrap_angle(azimuth: float) -> float:
    """Normalize an azimuth to [0, 2π)."""
    wrapped = azimuth % TWO_PI
    # -tiny % 2π can round to exactly 2π
    return 0.0 if wrapped >= TWO_PI else wrapped


def angular_distance(a: float, b: float) -> float:
    """Unsigned wrapped distance between two azimuths, in [0, π]."""
    diff = abs(a - b) % TWO_PI
    return min(diff, TWO_PI - diff)


# ------------------------------------------------------------------
# Codebook construction
# ------------------------------------------------------------------


def make_codebook(
    geometry: ArrayGeometry,
    n_directions: int,
    active_elements: int,
    sidelobe_gain: float = DEFAULT_SIDELOBE_GAIN,
    origin: float = 0.0,
) -> Codebook:
    """Build N equally spaced sector beams using ``active_elements`` antennas.

    Beam k points at ``origin + 2πk/N``; the default origin 0 puts beam 0 at
    azimuth 0.
    """
    if n_directions < 1:
        raise ValueError("n_directions must be at least 1")
    if active_elements < 1 or active_elements > geometry.size:
        raise ValueError(
            f"active_elements={active_elements} must be in [1, {geometry.size}] "
            f"for a {geometry.rows}x{geometry.cols} array"
        )
    if not 0.0 < sidelobe_gain < 1.0:
        raise ValueError("sidelobe_gain must be in (0, 1)")

    beamwidth = TWO_PI / n_directions
    codewords = tuple(
        BeamCodeword(
            center_azimuth=wrap_angle(origin + TWO_PI * k / n_directions),
            beamwidth=beamwidth,
            active_elements=active_elements,
            mainlobe_gain=float(active_elements),
            sidelobe_gain=sidelobe_gain,
            index=k,
            n_directions=n_directions,
            origin=origin,
        )
        for k in range(n_directions)
    )
    logger.debug(
        "Codebook %dx%d: %d beams, %d active, width %.1f deg",
        geometry.rows,
        geometry.cols,
        n_directions,
        active_elements,
        math.degrees(beamwidth),
    )
    return Codebook(codewords=codewords)


def make_wide_codebook(
    geometry: ArrayGeometry,
    narrow: Codebook,
    n_directions: int,
    active_elements: int,
    sidelobe_gain: float = DEFAULT_SIDELOBE_GAIN,
) -> Codebook:
    """Wide beams whose mainlobes are exactly the union of their refinement beams.

    Wide beam w covers the narrow beams returned by ``refinement_beams``;
    with an even number of narrow beams per sector the wide codebook is
    rotated by half a narrow beamwidth so the sector edges coincide.
    """
    if n_directions < 1 or narrow.size % n_directions:
        raise ValueError(
            f"{narrow.size} narrow beams do not split into {n_directions} wide sectors"
        )
    ratio = narrow.size // n_directions
    origin = narrow.origin - (narrow.beamwidth / 2.0 if ratio % 2 == 0 else 0.0)
    return make_codebook(geometry, n_directions, active_elements, sidelobe_gain, origin=origin)


# ------------------------------------------------------------------
# Gain evaluation
# ------------------------------------------------------------------


def sector_index(azimuth, beamwidth: float, n_directions: int, origin: float = 0.0):
    """Sector of a codebook of N equal beams (beam 0 at ``origin``) containing ``azimuth``.

    Shared by the scalar and vectorised gain paths.
    """
    shifted = np.mod(np.asarray(azimuth, dtype=float) - origin + beamwidth / 2.0, TWO_PI)
    return np.floor(shifted / beamwidth).astype(int) % n_directions


def beam_gain(codeword: BeamCodeword, azimuth: float) -> float:
    """Linear power gain of one codeword towards ``azimuth``."""
    sector = sector_index(
        azimuth, codeword.beamwidth, codeword.n_directions, codeword.origin
    )
    if int(sector) == codeword.index:
        return codeword.mainlobe_gain
    return codeword.sidelobe_gain


def mainlobe_index(codebook: Codebook, azimuth: float) -> int:
    """Index of the single codeword whose mainlobe contains ``azimuth``."""
    return int(sector_index(azimuth, codebook.beamwidth, codebook.size, codebook.origin))


def codebook_gains(codebook: Codebook, azimuths: np.ndarray) -> np.ndarray:
    """Gain of every codeword towards every azimuth, shape (N, len(azimuths))."""
    azimuths = np.asarray(azimuths, dtype=float)
    sectors = sector_index(azimuths, codebook.beamwidth, codebook.size, codebook.origin)
    gains = np.full((codebook.size, azimuths.size), codebook.sidelobe_gain)
    gains[sectors, np.arange(azimuths.size)] = codebook.mainlobe_gain
    return gains


# ------------------------------------------------------------------
# Beam selection
# ------------------------------------------------------------------


def best_beam_for_bearing(codebook: Codebook, bearing: float) -> int:
    """Codeword whose center is closest to ``bearing``; ties go to the lower index."""
    diff = np.abs(codebook.centers - bearing) % TWO_PI
    distances = np.minimum(diff, TWO_PI - diff)
    closest = distances.min()
    return int(np.flatnonzero(distances <= closest + _TIE_TOLERANCE)[0])


def adjacent_beams(codebook: Codebook, index: int, half_window: int) -> list[int]:
    """Beam ``index`` followed by its neighbours: [i, i-1, i+1, i-2, i+2, ...]."""
    n = codebook.size
    if not 0 <= index < n:
        raise ValueError(f"index {index} out of range for a {n}-beam codebook")
    if half_window < 0:
        raise ValueError("half_window must be non-negative")
    if 2 * half_window >= n:
        raise ValueError(
            f"half_window={half_window} would wrap onto itself in a {n}-beam codebook"
        )

    window = [index]
    for step in range(1, half_window + 1):
        window.append((index - step) % n)
        window.append((index + step) % n)
    return window


def refinement_beams(narrow: Codebook, wide: Codebook, wide_index: int) -> list[int]:
    """Narrow beams whose centers fall inside the mainlobe of wide beam ``wide_index``.

    For a wide codebook from ``make_wide_codebook`` their mainlobes add up to
    exactly that wide mainlobe.
    """
    ratio = narrow.size // wide.size
    first = wide_index * ratio - ratio // 2
    return [(first + j) % narrow.size for j in range(ratio)]
