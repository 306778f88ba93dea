"""Backscatter channel synthesis: deterministic wall echoes plus clustered clutter.

Deterministic echoes follow the monostatic radar range equation over occupied,
non-occluded grid cells. Clutter follows a clustered multipath model of the
Saleh-Valenzuela family whose cluster centroids are anchored to the room
perimeter: centroid projections are spread along the perimeter arc length, then
offset inward, so that centroid statistics can be expressed against the layout
(distance to the nearest edge, arc-length spacing of the projections).

Default statistical parameters correspond to a 60-GHz indoor corridor
characterization. The power-decay constants (``cluster_decay``, ``ray_decay``)
and the inward-offset scale ``dp_std`` are artifact defaults with no measured
counterpart; override them freely.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import List, Optional

import numpy as np

from .constants import FOUR_PI_CUBED, SPEED_OF_LIGHT_M_PER_NS
from .geometry import GridMap, Layout, Pose, ray_cast, wrap_degrees
from .antenna import ArrayPattern


@dataclass(frozen=True)
class Mpc:
    """One multipath component: round-trip delay (ns), absolute AOA (deg), linear power."""

    delay_ns: float
    aoa_deg: float
    power: float
    cluster_id: Optional[int] = None

    def __post_init__(self):
        if self.delay_ns < 0:
            raise ValueError("delay must be nonnegative")
        if self.power < 0:
            raise ValueError("power must be nonnegative")


@dataclass(frozen=True)
class ClutterParams:
    """Clustered-multipath statistics.

    inter_cluster_rate : cluster arrival rate on the delay axis (1/ns)
    inter_cluster_perimeter_distance_std : std of the one-way propagation delay
        between adjacent centroid perimeter projections (ns)
    intra_cluster_rate : ray arrival rate within a cluster (1/ns)
    intra_aoa_std : std of the Laplacian AOA offset around the cluster bearing (deg)
    cluster_decay / ray_decay : exponential power decay constants (ns)
    dp_std : scale of the half-normal inward centroid offset (m)
    """

    inter_cluster_rate: float = 0.21
    inter_cluster_perimeter_distance_std: float = 5.02
    intra_cluster_rate: float = 0.43
    intra_aoa_std: float = 16.9
    cluster_decay: float = 10.0
    ray_decay: float = 4.0
    dp_std: float = 0.5

    def __post_init__(self):
        for name in ("inter_cluster_rate", "intra_cluster_rate", "cluster_decay", "ray_decay"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        for name in ("inter_cluster_perimeter_distance_std", "intra_aoa_std", "dp_std"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be nonnegative")


@dataclass(frozen=True)
class ChannelRealization:
    """MPC list for one (pose, steering) pair, sorted by delay."""

    mpcs: tuple
    pose: Pose
    steering_deg: float

    def __post_init__(self):
        delays = [m.delay_ns for m in self.mpcs]
        if any(b < a for a, b in zip(delays, delays[1:])):
            raise ValueError("mpcs must be sorted by delay")

    def __len__(self) -> int:
        return len(self.mpcs)


def echo_power(two_way: float, wavelength_m: float, rrcs: float, distance_m: float) -> float:
    """Monostatic radar equation with RRCS ``s``: P = G^2 lambda^2 s^2 / ((4 pi)^3 d^4)."""
    return two_way * wavelength_m**2 * rrcs**2 / (FOUR_PI_CUBED * distance_m**4)


def visible_occupied_cells(grid: GridMap, pose: Pose):
    """Occupied cells with unobstructed line of sight from the pose.

    A cell is visible when it is the first occupied cell along the ray from the
    pose through its own center (hard occlusion); returns ``(index, distance_m,
    bearing_deg)`` triples.
    """
    p = pose.position
    out = []
    occupied = np.nonzero(grid.occupancy)[0]
    for idx in occupied:
        center = grid.cell_center(idx)
        dx, dy = center - p
        bearing = math.degrees(math.atan2(dy, dx))
        hit = ray_cast(grid, pose, bearing)
        if hit is not None and hit[0] == idx:
            out.append((int(idx), hit[1], bearing))
    return out


def _echo_mpcs(visible, grid: GridMap, pose: Pose, steering_deg: float, pattern: ArrayPattern):
    mpcs = []
    for idx, dist, bearing in visible:
        if dist <= 0:
            continue
        rel = float(wrap_degrees(bearing - pose.heading_deg - steering_deg))
        power = echo_power(pattern.two_way_gain(rel), pattern.wavelength_m, float(grid.rrcs[idx]), dist)
        delay = 2.0 * dist / SPEED_OF_LIGHT_M_PER_NS
        mpcs.append(Mpc(delay_ns=delay, aoa_deg=bearing, power=power))
    mpcs.sort(key=lambda m: m.delay_ns)
    return mpcs


def deterministic_echo(grid: GridMap, pose: Pose, steering_deg: float, pattern: ArrayPattern) -> ChannelRealization:
    """Single-bounce echoes from every visible occupied cell.

    ``steering_deg`` is relative to the pose heading; AOAs in the result are
    absolute bearings. Occluded cells (behind the first occupied cell on their
    ray) emit nothing.
    """
    if not grid.in_extent(pose.position):
        raise ValueError("pose is outside the grid extent")
    visible = visible_occupied_cells(grid, pose)
    return ChannelRealization(
        mpcs=tuple(_echo_mpcs(visible, grid, pose, steering_deg, pattern)),
        pose=pose,
        steering_deg=float(steering_deg),
    )


def poisson_arrival_times(rate_per_ns: float, t_max_ns: float, rng: np.random.Generator) -> np.ndarray:
    """Arrival times of a homogeneous Poisson process on (0, t_max]."""
    times = []
    t = rng.exponential(1.0 / rate_per_ns)
    while t <= t_max_ns:
        times.append(t)
        t += rng.exponential(1.0 / rate_per_ns)
    return np.asarray(times)


def _perimeter_centroids(params, layout, n_clusters, rng):
    """Centroid positions from perimeter-anchored projections plus inward offsets."""
    spacing_m = params.inter_cluster_perimeter_distance_std * SPEED_OF_LIGHT_M_PER_NS
    s0 = rng.uniform(0.0, layout.perimeter_length)
    gaps = rng.exponential(spacing_m, size=n_clusters)
    s_values = (s0 + np.cumsum(gaps)) % layout.perimeter_length
    offsets = np.abs(rng.normal(0.0, params.dp_std, size=n_clusters)) if params.dp_std > 0 else np.zeros(n_clusters)
    centroids = []
    for s, off in zip(s_values, offsets):
        point, inward = layout.point_at_arc_length(s)
        candidate = point + off * inward
        # Keep the centroid inside skinny rooms.
        while off > 1e-6 and not layout.contains(candidate):
            off *= 0.5
            candidate = point + off * inward
        centroids.append(candidate)
    return centroids


def sample_clutter(
    params: ClutterParams,
    layout: Layout,
    pose: Pose,
    steering_deg: float,
    pattern: ArrayPattern,
    rng: np.random.Generator,
    *,
    cluster_mode: str = "delay",
    rays_per_cluster: int = 10,
    p0: float = 1e-10,
) -> ChannelRealization:
    """Draw one clutter realization for a (pose, steering) pair.

    Cluster centroids are always placed along the perimeter (exponential
    arc-length gaps matching the configured spacing std, half-normal inward
    offset). Their count and delays depend on ``cluster_mode``:

    - ``"delay"`` (default): cluster delays are Poisson arrivals at
      ``inter_cluster_rate`` over the round-trip delay window of the room, so
      inter-cluster delay spacings are i.i.d. exponential; centroids then only
      anchor the cluster bearings and the perimeter statistics.
    - ``"perimeter"``: as many centroids as fit in one pass around the
      perimeter; cluster delays are the geometric round-trip delays to them.

    Each cluster emits ``rays_per_cluster`` rays with exponential excess-delay
    gaps, Laplacian AOA offsets around the centroid bearing and
    double-exponential power decay scaled by ``p0`` and the two-way gain at the
    ray bearing relative to the steered beam.
    """
    if not layout.contains(pose.position):
        raise ValueError("pose is outside the layout")
    if cluster_mode not in ("delay", "perimeter"):
        raise ValueError(f"unknown cluster_mode {cluster_mode!r}")
    if rays_per_cluster < 1:
        raise ValueError("rays_per_cluster must be >= 1")

    p = pose.position
    if cluster_mode == "delay":
        t_max = 2.0 * layout.max_distance_to_perimeter(p) / SPEED_OF_LIGHT_M_PER_NS
        cluster_delays = poisson_arrival_times(params.inter_cluster_rate, t_max, rng)
        centroids = _perimeter_centroids(params, layout, len(cluster_delays), rng)
    else:
        centroids = _perimeter_centroids_full_loop(params, layout, rng)
        cluster_delays = np.array(
            [2.0 * float(np.hypot(*(c - p))) / SPEED_OF_LIGHT_M_PER_NS for c in centroids]
        )
        order = np.argsort(cluster_delays)
        cluster_delays = cluster_delays[order]
        centroids = [centroids[i] for i in order]

    scale_aoa = params.intra_aoa_std / math.sqrt(2.0)
    mpcs: List[Mpc] = []
    for cid, (t_cluster, centroid) in enumerate(zip(cluster_delays, centroids)):
        bearing = math.degrees(math.atan2(centroid[1] - p[1], centroid[0] - p[0]))
        excess = np.concatenate([[0.0], np.cumsum(rng.exponential(1.0 / params.intra_cluster_rate, size=rays_per_cluster - 1))])
        aoa_offsets = rng.laplace(0.0, scale_aoa, size=rays_per_cluster) if scale_aoa > 0 else np.zeros(rays_per_cluster)
        cluster_gain = math.exp(-t_cluster / params.cluster_decay)
        for tau, off in zip(excess, aoa_offsets):
            aoa = float(wrap_degrees(bearing + off))
            rel = float(wrap_degrees(aoa - pose.heading_deg - steering_deg))
            power = p0 * cluster_gain * math.exp(-tau / params.ray_decay) * pattern.two_way_gain(rel)
            mpcs.append(Mpc(delay_ns=float(t_cluster + tau), aoa_deg=aoa, power=power, cluster_id=cid))
    mpcs.sort(key=lambda m: m.delay_ns)
    return ChannelRealization(mpcs=tuple(mpcs), pose=pose, steering_deg=float(steering_deg))


def _perimeter_centroids_full_loop(params, layout, rng):
    """Perimeter-mode centroids: spacings drawn until one pass around the loop."""
    spacing_m = params.inter_cluster_perimeter_distance_std * SPEED_OF_LIGHT_M_PER_NS
    s0 = rng.uniform(0.0, layout.perimeter_length)
    s_values = []
    total = rng.exponential(spacing_m)
    while total < layout.perimeter_length:
        s_values.append((s0 + total) % layout.perimeter_length)
        total += rng.exponential(spacing_m)
    offsets = np.abs(rng.normal(0.0, params.dp_std, size=len(s_values))) if params.dp_std > 0 else np.zeros(len(s_values))
    centroids = []
    for s, off in zip(s_values, offsets):
        point, inward = layout.point_at_arc_length(s)
        candidate = point + off * inward
        while off > 1e-6 and not layout.contains(candidate):
            off *= 0.5
            candidate = point + off * inward
        centroids.append(candidate)
    return centroids


def merge_realizations(echo: ChannelRealization, clutter: ChannelRealization) -> ChannelRealization:
    """Union of two realizations sharing pose and steering, re-sorted by delay."""
    if echo.pose != clutter.pose or echo.steering_deg != clutter.steering_deg:
        raise ValueError("cannot merge realizations with different pose or steering")
    merged = sorted(echo.mpcs + clutter.mpcs, key=lambda m: m.delay_ns)
    return ChannelRealization(mpcs=tuple(merged), pose=echo.pose, steering_deg=echo.steering_deg)


def realization_to_rows(realization: ChannelRealization):
    """Rows (delay_ns, aoa_deg, power, cluster_id) for CSV export."""
    return [
        (m.delay_ns, m.aoa_deg, m.power, "" if m.cluster_id is None else m.cluster_id)
        for m in realization.mpcs
    ]
