"""Grid-map reconstruction from energy matrices: EKF over RRCS and occupancy grids.

Two estimators consume the same temporal-angular energy matrices:

- An extended Kalman filter whose state is the per-cell root radar cross
  section. The observation model is the nonlinear radar range equation summed
  over every cell illuminated in a (steering, bin) entry, so beam side lobes
  couple cells instead of being ignored. Every matrix entry is consumed (soft
  decision), processed sequentially in row-major order with Joseph-form
  covariance updates and a nonnegativity projection of the mean.

- A log-odds occupancy grid with a beam-aware inverse sensor model: a detected
  entry spreads occupancy evidence over the illuminated cells proportionally to
  the two-way gain weights; a non-detection pushes emptiness evidence onto the
  main-lobe cells of that shell. With a laser-like (delta) beam both rules
  collapse to the classic single-cell update. Evidence is accumulated per scan
  and clamped once, so the result does not depend on entry order.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .antenna import ArrayPattern, BeamwidthUndefinedError, half_power_beamwidth
from .constants import FOUR_PI_CUBED, SPEED_OF_LIGHT_M_PER_NS
from .frontend import EnergyMatrix, RadarConfig
from .geometry import GridMap, Pose, wrap_degrees


@dataclass
class EkfBelief:
    """Gaussian belief over per-cell RRCS: mean vector plus full covariance."""

    mean: np.ndarray
    cov: np.ndarray
    width: int
    height: int

    @property
    def n_cells(self) -> int:
        return self.width * self.height


@dataclass
class OgBelief:
    """Per-cell occupancy belief in log-odds form."""

    log_odds: np.ndarray
    width: int
    height: int
    clamp: float = 10.0

    @property
    def probabilities(self) -> np.ndarray:
        return 1.0 / (1.0 + np.exp(-self.log_odds))

    @property
    def n_cells(self) -> int:
        return self.width * self.height


@dataclass(frozen=True)
class Bitmap:
    """Thresholded occupancy decision per cell."""

    occupied: np.ndarray
    width: int
    height: int

    def image(self) -> np.ndarray:
        return self.occupied.reshape(self.height, self.width)


@dataclass(frozen=True)
class EkfConfig:
    """EKF measurement-noise and projection settings.

    The measurement variance is ``n_pulses * N0**2 + noise_var_beta * N0 * h``:
    the accumulated-noise variance plus a signal-dependent term matching the
    signal-noise cross variance of a square-law detector.
    """

    noise_var_beta: float = 2.0
    weight_floor: float = 1e-6


@dataclass(frozen=True)
class OgConfig:
    """Occupancy-grid evidence constants and detection threshold quantile."""

    l_occ: float = math.log(3.0)
    l_emp: float = math.log(2.0)
    detection_quantile: float = 4.0
    clamp: float = 10.0
    weight_floor: float = 1e-6


@dataclass
class EkfUpdateStats:
    entries_consumed: int = 0
    entries_skipped_nonfinite: int = 0


@dataclass
class OgUpdateStats:
    entries_consumed: int = 0
    detections: int = 0


def ekf_init(dims, prior_mean: float = 0.0, prior_var: float = 1.0) -> EkfBelief:
    """Independent Gaussian prior per cell: constant mean, diagonal covariance."""
    if prior_var <= 0:
        raise ValueError("prior_var must be positive")
    width, height = int(dims[0]), int(dims[1])
    n = width * height
    return EkfBelief(
        mean=np.full(n, float(prior_mean)),
        cov=np.eye(n) * float(prior_var),
        width=width,
        height=height,
    )


def og_init(dims, prior_prob: float = 0.5, clamp: float = 10.0) -> OgBelief:
    """Uniform occupancy prior, stored as log odds."""
    if not 0.0 < prior_prob < 1.0:
        raise ValueError("prior probability must lie strictly between 0 and 1")
    width, height = int(dims[0]), int(dims[1])
    lo = math.log(prior_prob / (1.0 - prior_prob))
    return OgBelief(log_odds=np.full(width * height, lo), width=width, height=height, clamp=clamp)


class ObservationGeometry:
    """Per-pose illumination geometry shared by the EKF and OG updates.

    Precomputes, for every cell, its distance, bearing and delay bin from the
    pose, plus per-steering-row two-way gain weights and radar-equation
    coefficients. Cells closer than half a cell edge are excluded (the radar
    cannot observe the cell it stands in).
    """

    def __init__(self, grid: GridMap, pose: Pose, radar: RadarConfig, patterns: Sequence[ArrayPattern], weight_floor: float = 1e-6):
        if len(patterns) != radar.n_steerings:
            raise ValueError("need one pattern per steering row")
        self.grid = grid
        self.pose = pose
        self.radar = radar
        self.patterns = list(patterns)

        centers = grid.cell_centers()
        delta = centers - pose.position
        self.distance = np.hypot(delta[:, 0], delta[:, 1])
        self.bearing = np.degrees(np.arctan2(delta[:, 1], delta[:, 0]))
        self.valid = self.distance >= grid.resolution / 2.0

        delays = 2.0 * self.distance / SPEED_OF_LIGHT_M_PER_NS
        bins = np.floor(delays / radar.bin_duration_ns).astype(int)
        bins[~self.valid] = -1
        bins[bins >= radar.n_bins] = -1
        self.bin_index = bins

        with np.errstate(divide="ignore"):
            base = np.where(self.valid, 1.0, 0.0)
            base = np.divide(base, self.distance**4, out=np.zeros_like(self.distance), where=self.valid)
        self.range_coeff = base / FOUR_PI_CUBED  # lambda**2 applied per row

        self.row_weights = []
        self.row_main_lobe = []
        for steer, pattern in zip(radar.steering_degs, self.patterns):
            rel = wrap_degrees(self.bearing - pose.heading_deg - steer)
            w = pattern.two_way_gain(rel)
            w[w < weight_floor * pattern.peak_two_way] = 0.0
            w[~self.valid] = 0.0
            self.row_weights.append(w)
            try:
                half_width = half_power_beamwidth(pattern) / 2.0
                main = np.abs(rel) <= half_width
            except BeamwidthUndefinedError:
                main = np.ones_like(w, dtype=bool)
            self.row_main_lobe.append(main)

        order = np.argsort(bins, kind="stable")
        usable = bins[order] >= 0
        sorted_idx = order[usable]
        sorted_bins = bins[sorted_idx]
        boundaries = np.searchsorted(sorted_bins, np.arange(radar.n_bins + 1))
        self.bin_cells = [sorted_idx[boundaries[j]:boundaries[j + 1]] for j in range(radar.n_bins)]

    def kappa(self, row: int, idx: np.ndarray) -> np.ndarray:
        lam2 = self.patterns[row].wavelength_m ** 2
        return self.row_weights[row][idx] * self.range_coeff[idx] * lam2

    def entry_cells(self, row: int, bin_index: int) -> np.ndarray:
        idx = self.bin_cells[bin_index]
        if len(idx) == 0:
            return idx
        return idx[self.row_weights[row][idx] > 0.0]


def ekf_observation_model(
    mean: np.ndarray,
    grid: GridMap,
    pose: Pose,
    steering_deg: float,
    bin_index: int,
    pattern: ArrayPattern,
    radar: RadarConfig,
    weight_floor: float = 1e-6,
):
    """Predicted energy and its gradient for one (steering, bin) entry.

    ``h(s) = N_p N_0 + N_p E_p sum_i kappa_i s_i**2`` over cells in the bin's
    range shell, with ``kappa_i`` the two-way gain at the cell bearing times
    the radar-equation range loss; the gradient is ``2 N_p E_p kappa_i s_i``
    (zero outside the shell).
    """
    radar_one = RadarConfig(
        bandwidth_ghz=radar.bandwidth_ghz,
        pulse_energy=radar.pulse_energy,
        n_pulses=radar.n_pulses,
        noise_energy_per_bin=radar.noise_energy_per_bin,
        n_bins=radar.n_bins,
        steering_degs=(steering_deg,),
    )
    geom = ObservationGeometry(grid, pose, radar_one, [pattern], weight_floor)
    return _entry_prediction(geom, np.asarray(mean, dtype=float), 0, bin_index)


def _entry_prediction(geom: ObservationGeometry, mean: np.ndarray, row: int, bin_index: int):
    radar = geom.radar
    grad = np.zeros_like(mean)
    idx = geom.entry_cells(row, bin_index)
    h = radar.noise_mean
    if len(idx):
        kappa = geom.kappa(row, idx)
        scale = radar.n_pulses * radar.pulse_energy
        h += scale * float(kappa @ (mean[idx] ** 2))
        grad[idx] = 2.0 * scale * kappa * mean[idx]
    return h, grad


def measurement_variance(radar: RadarConfig, config: EkfConfig, predicted: float) -> float:
    """Energy-detector measurement variance for one accumulated bin."""
    n0 = radar.noise_energy_per_bin
    return radar.n_pulses * n0**2 + config.noise_var_beta * n0 * predicted


def ekf_update(
    belief: EkfBelief,
    matrix: EnergyMatrix,
    grid: GridMap,
    patterns: Sequence[ArrayPattern],
    radar: RadarConfig,
    config: EkfConfig = EkfConfig(),
):
    """Sequential scalar EKF update over every entry of one energy matrix.

    Entries are processed in row-major (steering, bin) order; each one applies
    a rank-1 Joseph-form covariance update and projects the posterior mean onto
    nonnegative RRCS. Entries whose shell is empty leave the belief unchanged
    but still count as consumed. Returns the updated belief and statistics.
    """
    if belief.n_cells != grid.n_cells:
        raise ValueError("belief and grid dimensions disagree")
    if matrix.values.shape != (radar.n_steerings, radar.n_bins):
        raise ValueError("matrix shape does not match the radar configuration")

    geom = ObservationGeometry(grid, pose=matrix.pose, radar=radar, patterns=patterns, weight_floor=config.weight_floor)
    mean = belief.mean.copy()
    cov = belief.cov.copy()
    stats = EkfUpdateStats()
    scale = radar.n_pulses * radar.pulse_energy

    for b in range(radar.n_steerings):
        z_row = matrix.values[b]
        for j in range(radar.n_bins):
            z = z_row[j]
            if not np.isfinite(z):
                stats.entries_skipped_nonfinite += 1
                continue
            stats.entries_consumed += 1
            idx = geom.entry_cells(b, j)
            if len(idx) == 0:
                continue
            kappa = geom.kappa(b, idx)
            m = mean[idx]
            h = radar.noise_mean + scale * float(kappa @ (m * m))
            g = 2.0 * scale * kappa * m
            if not np.any(g):
                continue
            R = measurement_variance(radar, config, h)
            u = cov[:, idx] @ g
            S = float(g @ u[idx]) + R
            if S <= 0.0:
                continue
            K = u / S
            mean += K * (z - h)
            np.maximum(mean, 0.0, out=mean)
            # Joseph form expanded around the rank-1 gain:
            # P' = P - K u^T - u K^T + S K K^T.
            cov -= np.outer(K, u)
            cov -= np.outer(u - S * K, K)
    return EkfBelief(mean=mean, cov=cov, width=belief.width, height=belief.height), stats


def og_update(
    belief: OgBelief,
    matrix: EnergyMatrix,
    grid: GridMap,
    patterns: Sequence[ArrayPattern],
    radar: RadarConfig,
    config: OgConfig = OgConfig(),
):
    """Beam-aware log-odds update from one energy matrix.

    Detection threshold: noise mean plus ``detection_quantile`` noise stds.
    Detected entries add ``l_occ`` split over the shell cells proportionally to
    their gain weights; non-detections subtract ``l_emp`` shares from the
    main-lobe cells of the shell. All evidence from the matrix is summed before
    a single clamp, making the update independent of entry order.
    """
    if belief.n_cells != grid.n_cells:
        raise ValueError("belief and grid dimensions disagree")
    if matrix.values.shape != (radar.n_steerings, radar.n_bins):
        raise ValueError("matrix shape does not match the radar configuration")

    geom = ObservationGeometry(grid, pose=matrix.pose, radar=radar, patterns=patterns, weight_floor=config.weight_floor)
    gamma_d = radar.noise_mean + config.detection_quantile * radar.noise_std
    deltas = np.zeros(belief.n_cells)
    stats = OgUpdateStats()

    for b in range(radar.n_steerings):
        w = geom.row_weights[b]
        usable = (w > 0.0) & (geom.bin_index >= 0)
        idx = np.nonzero(usable)[0]
        stats.entries_consumed += radar.n_bins
        detected = matrix.values[b] > gamma_d
        stats.detections += int(np.count_nonzero(detected))
        if len(idx) == 0:
            continue
        bins = geom.bin_index[idx]
        weight_sums = np.bincount(bins, weights=w[idx], minlength=radar.n_bins)
        share = w[idx] / weight_sums[bins]
        hit = detected[bins]
        contrib = np.where(hit, config.l_occ * share, 0.0)
        main = geom.row_main_lobe[b][idx]
        contrib -= np.where(~hit & main, config.l_emp * share, 0.0)
        np.add.at(deltas, idx, contrib)

    log_odds = np.clip(belief.log_odds + deltas, -config.clamp, config.clamp)
    return OgBelief(log_odds=log_odds, width=belief.width, height=belief.height, clamp=config.clamp), stats


def threshold_map(belief, eta: float) -> Bitmap:
    """Binarize a belief: cell occupied when its value strictly exceeds ``eta``.

    For an occupancy grid the compared value is the occupancy probability
    (``eta`` in (0, 1)); for the EKF it is the posterior mean RRCS (``eta`` >= 0).
    """
    if isinstance(belief, OgBelief):
        if not 0.0 < eta < 1.0:
            raise ValueError("eta must lie strictly between 0 and 1 for occupancy grids")
        occupied = belief.probabilities > eta
    elif isinstance(belief, EkfBelief):
        if eta < 0.0:
            raise ValueError("eta must be nonnegative for RRCS beliefs")
        occupied = belief.mean > eta
    else:
        raise TypeError(f"unsupported belief type {type(belief).__name__}")
    occupied = occupied.copy()
    occupied.flags.writeable = False
    return Bitmap(occupied=occupied, width=belief.width, height=belief.height)
