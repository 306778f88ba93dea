"""Channel characterization from energy matrices: peak extraction, clustering, fitting.

The pipeline mirrors how measured backscatter data is reduced to model
parameters: (1) greedy joint delay-angle peak extraction turns a matrix into a
discrete MPC list while suppressing side-lobe aliases, (2) K-means with
silhouette-based model-order selection groups MPCs into clusters, (3) maximum
likelihood fits produce arrival rates, the AOA spread, and perimeter-referenced
centroid statistics.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np
from sklearn.cluster import KMeans
from sklearn.metrics import silhouette_score

from .antenna import ArrayPattern, BeamwidthUndefinedError, half_power_beamwidth
from .channel import Mpc
from .constants import SPEED_OF_LIGHT_M_PER_NS
from .frontend import EnergyMatrix
from .geometry import Layout, Pose, perimeter_projection, wrap_degrees

SILHOUETTE_MIN = 0.25


@dataclass(frozen=True)
class ExtractionConfig:
    """Peak-extraction settings.

    The threshold is a multiple of the noise floor; window half-widths default
    to twice the bin duration in delay and to the per-row half-power beamwidth
    in angle when left as ``None``.
    """

    energy_threshold: float = 6.0
    delay_window_ns: Optional[float] = None
    angle_window_deg: Optional[float] = None

    def __post_init__(self):
        if self.energy_threshold <= 0:
            raise ValueError("energy_threshold must be positive")
        for name in ("delay_window_ns", "angle_window_deg"):
            v = getattr(self, name)
            if v is not None and v <= 0:
                raise ValueError(f"{name} must be positive")


@dataclass(frozen=True)
class Cluster:
    centroid_delay_ns: float
    centroid_aoa_deg: float
    members: tuple


@dataclass(frozen=True)
class ClusterSet:
    """Partition of an MPC list; centroids are the member means in (delay, aoa)."""

    clusters: tuple

    @property
    def n_clusters(self) -> int:
        return len(self.clusters)

    @property
    def n_mpcs(self) -> int:
        return sum(len(c.members) for c in self.clusters)


@dataclass(frozen=True)
class ParamEstimate:
    value: float
    sample_count: int
    ci_half_width: float


@dataclass(frozen=True)
class FittedClutterParams:
    """Estimated clutter statistics; fields are ``None`` when too few samples exist.

    The power-decay constants are intentionally not estimated (the energy-peak
    powers returned by extraction are accumulator outputs, not calibrated path
    gains), so ``cluster_decay`` and ``ray_decay`` are always ``None``.
    """

    inter_cluster_rate: Optional[ParamEstimate] = None
    inter_cluster_perimeter_distance_std: Optional[ParamEstimate] = None
    intra_cluster_rate: Optional[ParamEstimate] = None
    intra_aoa_std: Optional[ParamEstimate] = None
    cluster_decay: Optional[ParamEstimate] = None
    ray_decay: Optional[ParamEstimate] = None
    dp_std: Optional[ParamEstimate] = None

    def to_table(self) -> list:
        rows = []
        for name, distribution in (
            ("inter_cluster_rate", "exponential"),
            ("inter_cluster_perimeter_distance_std", "empirical"),
            ("intra_cluster_rate", "exponential"),
            ("intra_aoa_std", "laplacian"),
            ("cluster_decay", "not fitted"),
            ("ray_decay", "not fitted"),
            ("dp_std", "half-normal"),
        ):
            est = getattr(self, name)
            rows.append(
                {
                    "parameter": name,
                    "estimate": None if est is None else est.value,
                    "distribution": distribution,
                    "sample_count": 0 if est is None else est.sample_count,
                    "ci_half_width": None if est is None else est.ci_half_width,
                }
            )
        return rows


def estimate_noise_floor(matrix: EnergyMatrix) -> float:
    """Noise-floor estimate from the cell median.

    The median of an exponential is ``ln 2`` times its mean, so dividing the
    matrix median by ``ln 2`` recovers the mean noise energy as long as signal
    peaks occupy a minority of cells. For near-Gaussian accumulated noise the
    estimate is conservatively high, which only tightens the threshold.
    """
    return float(np.median(matrix.values)) / math.log(2.0)


def extract_mpcs(
    matrix: EnergyMatrix,
    config: ExtractionConfig,
    patterns: Sequence[ArrayPattern],
    noise_floor: Optional[float] = None,
) -> List[Mpc]:
    """Greedy joint delay-angle peak extraction.

    Repeatedly takes the global maximum cell above ``energy_threshold`` times
    the noise floor, records an MPC at the bin-center delay and the row's
    absolute steering bearing, and suppresses all cells within the delay and
    angle windows of the peak; the joint window removes side-lobe aliases,
    which share the delay but sit in neighboring rows at lower energy. Equal
    peaks are taken in ascending (row, bin) order.
    """
    if matrix.values.size == 0:
        raise ValueError("matrix is empty")
    if len(patterns) != matrix.values.shape[0]:
        raise ValueError("need one pattern per steering row")
    if noise_floor is None:
        noise_floor = estimate_noise_floor(matrix)
    threshold = config.energy_threshold * noise_floor

    t_bin = matrix.bin_duration_ns
    delay_win = config.delay_window_ns if config.delay_window_ns is not None else 2.0 * t_bin
    if config.angle_window_deg is not None:
        angle_wins = [config.angle_window_deg] * len(patterns)
    else:
        try:
            angle_wins = [half_power_beamwidth(p) for p in patterns]
        except BeamwidthUndefinedError as exc:
            raise ValueError(
                "angle_window_deg must be given explicitly for patterns without a defined beamwidth"
            ) from exc

    steer = np.asarray(matrix.steering_degs)
    heading = matrix.pose.heading_deg
    bin_centers = (np.arange(matrix.n_bins) + 0.5) * t_bin
    work = matrix.values.copy()
    mpcs: List[Mpc] = []
    for _ in range(work.size):
        flat = int(np.argmax(work))
        b, j = divmod(flat, matrix.n_bins)
        peak = work[b, j]
        if peak <= threshold:
            break
        aoa = float(wrap_degrees(heading + steer[b]))
        mpcs.append(Mpc(delay_ns=float(bin_centers[j]), aoa_deg=aoa, power=float(peak)))
        row_mask = np.abs(wrap_degrees(steer - steer[b])) <= angle_wins[b] + 1e-12
        bin_mask = np.abs(bin_centers - bin_centers[j]) <= delay_win + 1e-12
        work[np.ix_(row_mask, bin_mask)] = -np.inf
    return mpcs


def _standardize(features: np.ndarray) -> np.ndarray:
    std = features.std(axis=0)
    std[std == 0.0] = 1.0
    return (features - features.mean(axis=0)) / std


def cluster_mpcs(mpcs: Sequence[Mpc], k_max: int = 10, seed: int = 0) -> ClusterSet:
    """K-means clustering in standardized (delay, aoa) space.

    The cluster count is chosen by maximum mean silhouette over K = 2..k_max
    (ties toward smaller K); K = 1 is selected when the best silhouette falls
    below 0.25 or when fewer than three MPCs are available.
    """
    if not mpcs:
        raise ValueError("cannot cluster an empty MPC list")
    if k_max < 1:
        raise ValueError("k_max must be >= 1")
    features = np.array([[m.delay_ns, m.aoa_deg] for m in mpcs])
    n = len(mpcs)
    if n == 1 or np.allclose(features, features[0]):
        return _build_clusters(mpcs, np.zeros(n, dtype=int))

    X = _standardize(features)
    best_k, best_score, best_labels = 1, -np.inf, np.zeros(n, dtype=int)
    for k in range(2, min(k_max, n - 1) + 1):
        km = KMeans(n_clusters=k, n_init=10, random_state=seed)
        labels = km.fit_predict(X)
        if len(np.unique(labels)) < 2:
            continue
        score = silhouette_score(X, labels)
        if score > best_score:
            best_k, best_score, best_labels = k, score, labels
    if best_k == 1 or best_score < SILHOUETTE_MIN:
        return _build_clusters(mpcs, np.zeros(n, dtype=int))
    return _build_clusters(mpcs, best_labels)


def _build_clusters(mpcs: Sequence[Mpc], labels: np.ndarray) -> ClusterSet:
    clusters = []
    for lab in np.unique(labels):
        members = tuple(m for m, l in zip(mpcs, labels) if l == lab)
        delays = np.array([m.delay_ns for m in members])
        aoas = np.array([m.aoa_deg for m in members])
        clusters.append(
            Cluster(
                centroid_delay_ns=float(delays.mean()),
                centroid_aoa_deg=float(aoas.mean()),
                members=members,
            )
        )
    clusters.sort(key=lambda c: c.centroid_delay_ns)
    return ClusterSet(clusters=tuple(clusters))


def _exponential_rate(spacings: np.ndarray) -> ParamEstimate:
    mean = float(np.mean(spacings))
    rate = 1.0 / mean
    return ParamEstimate(value=rate, sample_count=len(spacings), ci_half_width=1.96 * rate / math.sqrt(len(spacings)))


def _inter_cluster_spacings(cluster_sets: Sequence[ClusterSet]) -> np.ndarray:
    out = []
    for cs in cluster_sets:
        delays = np.sort([c.centroid_delay_ns for c in cs.clusters])
        out.extend(np.diff(delays))
    return np.asarray(out)


def _intra_cluster_spacings(cluster_sets: Sequence[ClusterSet]) -> np.ndarray:
    out = []
    for cs in cluster_sets:
        for c in cs.clusters:
            delays = np.sort([m.delay_ns for m in c.members])
            out.extend(np.diff(delays))
    return np.asarray(out)


def _aoa_offsets(cluster_sets: Sequence[ClusterSet]) -> np.ndarray:
    out = []
    for cs in cluster_sets:
        for c in cs.clusters:
            if len(c.members) < 2:
                continue
            aoas = np.array([m.aoa_deg for m in c.members])
            med = float(np.median(aoas))
            out.extend(wrap_degrees(aoas - med))
    return np.asarray(out)


def fit_clutter_params_pooled(scans: Sequence[Tuple[ClusterSet, Pose]], layout: Layout) -> FittedClutterParams:
    """Fit clutter statistics from clustered MPCs pooled over many scans.

    - inter/intra arrival rates: exponential MLE (reciprocal mean) over sorted
      delay spacings,
    - AOA spread: Laplacian MLE scale (mean absolute deviation from the
      per-cluster median) converted to a standard deviation via ``sqrt(2)``,
    - centroid statistics: centroids mapped to Cartesian points, projected onto
      the perimeter; ``dp_std`` is the half-normal scale of the edge distances
      and the perimeter spacing std comes from sorted adjacent arc-length
      differences (converted meters -> ns with the one-way speed of light).
    """
    inter = _inter_cluster_spacings([cs for cs, _ in scans])
    intra = _intra_cluster_spacings([cs for cs, _ in scans])
    offsets = _aoa_offsets([cs for cs, _ in scans])

    inter_est = _exponential_rate(inter) if len(inter) >= 1 and np.mean(inter) > 0 else None
    intra_est = _exponential_rate(intra) if len(intra) >= 1 and np.mean(intra) > 0 else None

    aoa_est = None
    if len(offsets) >= 2:
        scale = float(np.mean(np.abs(offsets)))
        std = scale * math.sqrt(2.0)
        aoa_est = ParamEstimate(value=std, sample_count=len(offsets), ci_half_width=1.96 * std / math.sqrt(len(offsets)))

    dp_samples = []
    s_diffs = []
    for cs, pose in scans:
        s_vals = []
        for c in cs.clusters:
            r = c.centroid_delay_ns * SPEED_OF_LIGHT_M_PER_NS / 2.0
            angle = math.radians(c.centroid_aoa_deg)
            point = pose.position + r * np.array([math.cos(angle), math.sin(angle)])
            if not layout.contains(point):
                continue
            d_p, s = perimeter_projection(layout, point)
            dp_samples.append(d_p)
            s_vals.append(s)
        if len(s_vals) >= 2:
            s_diffs.extend(np.diff(np.sort(s_vals)))

    dp_est = None
    if len(dp_samples) >= 2:
        sigma = float(np.sqrt(np.mean(np.square(dp_samples))))
        dp_est = ParamEstimate(value=sigma, sample_count=len(dp_samples), ci_half_width=1.96 * sigma / math.sqrt(2 * len(dp_samples)))

    perim_est = None
    if len(s_diffs) >= 2:
        diffs_ns = np.asarray(s_diffs) / SPEED_OF_LIGHT_M_PER_NS
        std = float(np.std(diffs_ns, ddof=1))
        perim_est = ParamEstimate(value=std, sample_count=len(s_diffs), ci_half_width=1.96 * std / math.sqrt(2 * len(s_diffs)))

    return FittedClutterParams(
        inter_cluster_rate=inter_est,
        inter_cluster_perimeter_distance_std=perim_est,
        intra_cluster_rate=intra_est,
        intra_aoa_std=aoa_est,
        dp_std=dp_est,
    )


def fit_clutter_params(clusters: ClusterSet, layout: Layout, pose: Pose) -> FittedClutterParams:
    """Single-scan convenience wrapper around :func:`fit_clutter_params_pooled`."""
    return fit_clutter_params_pooled([(clusters, pose)], layout)
