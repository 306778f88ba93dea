"""Steered uniform-linear-array power patterns, with optional phase quantization.

The azimuth cut of the physical panel is modeled as an N-element uniform linear
array with isotropic elements. Per-element phases are set to steer the beam to
the requested direction and, when ``phase_bits`` is configured, quantized to
``2**phase_bits`` uniform levels (1 bit -> {0, pi}), which raises side lobes the
way coarse phase control does on real hardware.

One-way power gain is normalized so the unquantized peak equals N (coherent
power gain). Patterns are sampled every 0.5 deg of bearing relative to the
steering direction and linearly interpolated in between. For N >= 2 the half
space behind the panel is blanked (the feed/ground structure of a panel array
does not radiate backwards); a single element stays isotropic.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Optional

import numpy as np

from .constants import SPEED_OF_LIGHT_M_PER_S
from .geometry import wrap_degrees

PATTERN_STEP_DEG = 0.5
_N_SAMPLES = int(round(360.0 / PATTERN_STEP_DEG))


class BeamwidthUndefinedError(ValueError):
    """Raised when a pattern has no -3 dB crossings around its peak."""


@dataclass(frozen=True)
class ArrayConfig:
    """Array geometry and carrier settings.

    element_spacing is a fraction of the carrier wavelength; phase_bits of
    ``None`` means ideal (continuous) phase control.
    """

    n_elements: int = 100
    element_spacing: float = 0.5
    carrier_ghz: float = 60.5
    phase_bits: Optional[int] = None

    def __post_init__(self):
        if self.n_elements < 1:
            raise ValueError("n_elements must be >= 1")
        if self.element_spacing <= 0:
            raise ValueError("element_spacing must be positive")
        if self.carrier_ghz <= 0:
            raise ValueError("carrier frequency must be positive")
        if self.phase_bits is not None and self.phase_bits < 1:
            raise ValueError("phase_bits must be >= 1 when given")

    @property
    def wavelength_m(self) -> float:
        return SPEED_OF_LIGHT_M_PER_S / (self.carrier_ghz * 1e9)


@dataclass(frozen=True)
class ArrayPattern:
    """Sampled one-way power gain versus bearing relative to the steering direction.

    ``gains[k]`` is the gain at relative bearing ``-180 + k * 0.5`` degrees.
    """

    steering_deg: float
    gains: np.ndarray
    wavelength_m: float
    n_elements: int = 1

    def __post_init__(self):
        if self.gains.shape != (_N_SAMPLES,):
            raise ValueError(f"gains must have {_N_SAMPLES} samples")
        if np.any(self.gains < 0):
            raise ValueError("gains must be nonnegative")

    @property
    def peak_gain(self) -> float:
        return float(self.gains.max())

    @property
    def peak_two_way(self) -> float:
        return self.peak_gain**2

    def one_way_gain(self, bearing_deg):
        """Linearly interpolated one-way power gain at a relative bearing."""
        rel = wrap_degrees(bearing_deg)
        pos = (rel + 180.0) / PATTERN_STEP_DEG
        i0 = np.floor(pos).astype(int) % _N_SAMPLES
        i1 = (i0 + 1) % _N_SAMPLES
        frac = pos - np.floor(pos)
        g = self.gains[i0] * (1.0 - frac) + self.gains[i1] * frac
        return g if np.ndim(bearing_deg) else float(g)

    def two_way_gain(self, bearing_deg):
        """Transmit*receive power gain: the square of the one-way gain."""
        g = self.one_way_gain(bearing_deg)
        return g * g


def _quantize_phases(phases: np.ndarray, bits: int) -> np.ndarray:
    step = 2.0 * math.pi / (2**bits)
    return np.round(phases / step) * step


@lru_cache(maxsize=512)
def synthesize_pattern(config: ArrayConfig, steering_deg: float = 0.0) -> ArrayPattern:
    """Synthesize the steered one-way power pattern of a uniform linear array.

    Parameters
    ----------
    config : ArrayConfig
        Element count, spacing and carrier; ``phase_bits`` enables quantized
        steering phases.
    steering_deg : float
        Steering direction relative to the panel broadside (deg).

    Returns
    -------
    ArrayPattern
        Power gain sampled every 0.5 deg of relative bearing; unquantized
        patterns peak at exactly ``n_elements`` at 0 deg.
    """
    phi = np.arange(-180.0, 180.0, PATTERN_STEP_DEG)
    n = config.n_elements
    if n == 1:
        gains = np.ones(_N_SAMPLES)
    else:
        theta = steering_deg + phi
        u = np.sin(np.radians(theta))
        u_s = math.sin(math.radians(steering_deg))
        c_n = 2.0 * math.pi * config.element_spacing * np.arange(n)
        if config.phase_bits is None:
            # Grouping (u - u_s) keeps the on-axis phases exactly zero, so the
            # peak gain equals N with no rounding error.
            af = np.exp(1j * np.outer(u - u_s, c_n)).sum(axis=1)
        else:
            psi = _quantize_phases(-c_n * u_s, config.phase_bits)
            af = np.exp(1j * (np.outer(u, c_n) + psi)).sum(axis=1)
        gains = np.abs(af) ** 2 / n
        gains[np.abs(wrap_degrees(theta)) > 90.0] = 0.0
    gains.flags.writeable = False
    return ArrayPattern(
        steering_deg=float(steering_deg),
        gains=gains,
        wavelength_m=config.wavelength_m,
        n_elements=n,
    )


def patterns_for(config: ArrayConfig, steering_degs) -> list:
    """One pattern per steering direction (cached synthesis)."""
    return [synthesize_pattern(config, float(s)) for s in steering_degs]


def two_way_gain(pattern: ArrayPattern, bearing_deg):
    """Module-level alias of :meth:`ArrayPattern.two_way_gain`."""
    return pattern.two_way_gain(bearing_deg)


def half_power_beamwidth(pattern: ArrayPattern) -> float:
    """Angular width (deg) between the -3 dB crossings around the pattern peak.

    Raises
    ------
    BeamwidthUndefinedError
        If the gain never drops below half power on either side of the peak
        (e.g. the flat single-element pattern).
    """
    gains = pattern.gains
    peak_idx = int(np.argmax(gains))
    peak = gains[peak_idx]
    if peak <= 0:
        raise BeamwidthUndefinedError("pattern has no positive peak")
    half = peak / 2.0

    def crossing(direction: int) -> float:
        prev = peak
        for k in range(1, _N_SAMPLES):
            idx = peak_idx + direction * k
            if idx < 0 or idx >= _N_SAMPLES:
                break
            g = gains[idx]
            if g < half:
                frac = (prev - half) / (prev - g)
                return (k - 1 + frac) * PATTERN_STEP_DEG
            prev = g
        raise BeamwidthUndefinedError("no half-power crossing; beamwidth undefined")

    return crossing(+1) + crossing(-1)


def delta_pattern(gain: float = 1.0, wavelength_m: float = ArrayConfig().wavelength_m, steering_deg: float = 0.0) -> ArrayPattern:
    """Laser-like degenerate pattern: a single nonzero sample at 0 deg.

    Useful as the limiting case where beam-aware mapping updates reduce to the
    single-cell inverse sensor model.
    """
    gains = np.zeros(_N_SAMPLES)
    gains[_N_SAMPLES // 2] = float(gain)
    gains.flags.writeable = False
    return ArrayPattern(
        steering_deg=float(steering_deg),
        gains=gains,
        wavelength_m=wavelength_m,
        n_elements=1,
    )
