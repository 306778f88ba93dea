"""Polygonal indoor layouts, rasterized grids, ray casting and perimeter projections.

Conventions:
- World frame: x to the right, y up, angles in degrees measured counter-clockwise
  from the +x axis (``atan2`` convention).
- Grid cells are squares of edge ``resolution``; cell ``(ix, iy)`` covers
  ``[origin + ix*res, origin + (ix+1)*res)`` on each axis and is addressed by the
  flat index ``iy * width + ix``.
- Layout perimeters are stored counter-clockwise; the interior lies to the left
  of the direction of travel.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np


def wrap_degrees(angle):
    """Wrap an angle (scalar or array) to [-180, 180)."""
    return (np.asarray(angle) + 180.0) % 360.0 - 180.0


@dataclass(frozen=True)
class Pose:
    """Radar position (m) and heading (deg, normalized to [0, 360))."""

    x: float
    y: float
    heading_deg: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "heading_deg", float(self.heading_deg) % 360.0)

    @property
    def position(self) -> np.ndarray:
        return np.array([self.x, self.y], dtype=float)


class LayoutError(ValueError):
    """Raised for degenerate or self-intersecting layout polygons."""


def _polygon_area(vertices: np.ndarray) -> float:
    x, y = vertices[:, 0], vertices[:, 1]
    return 0.5 * float(np.sum(x * np.roll(y, -1) - np.roll(x, -1) * y))


def _orient(p, q, r) -> float:
    return (q[0] - p[0]) * (r[1] - p[1]) - (q[1] - p[1]) * (r[0] - p[0])


def _segments_cross(a0, a1, b0, b1) -> bool:
    """Proper or touching intersection between segments a and b."""
    d1 = _orient(b0, b1, a0)
    d2 = _orient(b0, b1, a1)
    d3 = _orient(a0, a1, b0)
    d4 = _orient(a0, a1, b1)
    if ((d1 > 0) != (d2 > 0)) and ((d3 > 0) != (d4 > 0)):
        return True

    def on_segment(p, q, r):
        return (
            abs(_orient(p, q, r)) < 1e-12
            and min(p[0], q[0]) - 1e-12 <= r[0] <= max(p[0], q[0]) + 1e-12
            and min(p[1], q[1]) - 1e-12 <= r[1] <= max(p[1], q[1]) + 1e-12
        )

    return (
        on_segment(b0, b1, a0)
        or on_segment(b0, b1, a1)
        or on_segment(a0, a1, b0)
        or on_segment(a0, a1, b1)
    )


def _validate_simple_polygon(vertices: np.ndarray, label: str) -> None:
    n = len(vertices)
    if n < 3:
        raise LayoutError(f"{label} needs at least 3 vertices, got {n}")
    if abs(_polygon_area(vertices)) < 1e-12:
        raise LayoutError(f"{label} has (near-)zero area")
    for i in range(n):
        a0, a1 = vertices[i], vertices[(i + 1) % n]
        for j in range(i + 1, n):
            # Skip edges sharing a vertex with edge i.
            if j == i or (j + 1) % n == i or j == (i + 1) % n:
                continue
            b0, b1 = vertices[j], vertices[(j + 1) % n]
            if _segments_cross(a0, a1, b0, b1):
                raise LayoutError(f"{label} is self-intersecting (edges {i} and {j})")


def _point_segment_distance(points: np.ndarray, a: np.ndarray, b: np.ndarray):
    """Distances from ``points`` (n, 2) to segment a-b, plus projection parameter t."""
    ab = b - a
    denom = float(ab @ ab)
    if denom == 0.0:
        d = np.linalg.norm(points - a, axis=-1)
        return d, np.zeros(len(points))
    t = np.clip(((points - a) @ ab) / denom, 0.0, 1.0)
    proj = a + t[:, None] * ab
    return np.linalg.norm(points - proj, axis=-1), t


class Layout:
    """Closed polygonal room perimeter plus optional interior obstacle polygons.

    Vertices are (x, y) pairs in meters. The perimeter is normalized to
    counter-clockwise order at construction; arc length is measured from
    vertex 0 along that orientation.
    """

    def __init__(self, perimeter, obstacles=(), default_rrcs: float = 1.0):
        perimeter = np.asarray(perimeter, dtype=float)
        if perimeter.ndim != 2 or perimeter.shape[1] != 2:
            raise LayoutError("perimeter must be a sequence of (x, y) pairs")
        _validate_simple_polygon(perimeter, "perimeter")
        if _polygon_area(perimeter) < 0:
            perimeter = perimeter[::-1].copy()
        self.perimeter = perimeter
        self.perimeter.flags.writeable = False

        obs = []
        for k, poly in enumerate(obstacles):
            poly = np.asarray(poly, dtype=float)
            _validate_simple_polygon(poly, f"obstacle {k}")
            if _polygon_area(poly) < 0:
                poly = poly[::-1].copy()
            for v in poly:
                if not self.contains(v):
                    raise LayoutError(f"obstacle {k} is not inside the perimeter")
            poly.flags.writeable = False
            obs.append(poly)
        self.obstacles = tuple(obs)

        if default_rrcs < 0:
            raise LayoutError("default_rrcs must be nonnegative")
        self.default_rrcs = float(default_rrcs)

        edges = np.roll(self.perimeter, -1, axis=0) - self.perimeter
        self._edge_lengths = np.linalg.norm(edges, axis=1)
        self._cum_lengths = np.concatenate([[0.0], np.cumsum(self._edge_lengths)])

    @property
    def perimeter_length(self) -> float:
        return float(self._cum_lengths[-1])

    @property
    def bounding_box(self):
        lo = self.perimeter.min(axis=0)
        hi = self.perimeter.max(axis=0)
        return (float(lo[0]), float(lo[1]), float(hi[0]), float(hi[1]))

    def all_edges(self):
        """All (start, end) edge pairs of perimeter and obstacles."""
        polys = (self.perimeter, *self.obstacles)
        for poly in polys:
            for i in range(len(poly)):
                yield poly[i], poly[(i + 1) % len(poly)]

    def boundary_distance(self, point) -> float:
        """Distance from ``point`` to the nearest perimeter edge (obstacles ignored)."""
        p = np.asarray(point, dtype=float)[None, :]
        best = math.inf
        n = len(self.perimeter)
        for i in range(n):
            d, _ = _point_segment_distance(p, self.perimeter[i], self.perimeter[(i + 1) % n])
            best = min(best, float(d[0]))
        return best

    def contains(self, point) -> bool:
        """Even-odd point-in-perimeter test; boundary points count as inside."""
        x, y = float(point[0]), float(point[1])
        if self.boundary_distance((x, y)) < 1e-9:
            return True
        inside = False
        n = len(self.perimeter)
        j = n - 1
        for i in range(n):
            xi, yi = self.perimeter[i]
            xj, yj = self.perimeter[j]
            if (yi > y) != (yj > y) and x < (xj - xi) * (y - yi) / (yj - yi) + xi:
                inside = not inside
            j = i
        return inside

    def point_at_arc_length(self, s: float):
        """Perimeter point and inward unit normal at arc-length coordinate ``s``.

        ``s`` is taken modulo the total perimeter length.
        """
        s = float(s) % self.perimeter_length
        i = int(np.searchsorted(self._cum_lengths, s, side="right") - 1)
        i = min(i, len(self.perimeter) - 1)
        a = self.perimeter[i]
        b = self.perimeter[(i + 1) % len(self.perimeter)]
        t = (s - self._cum_lengths[i]) / self._edge_lengths[i]
        direction = (b - a) / self._edge_lengths[i]
        # CCW perimeter: interior is to the left of the travel direction.
        inward = np.array([-direction[1], direction[0]])
        return a + t * (b - a), inward

    def max_distance_to_perimeter(self, point) -> float:
        """Largest distance from ``point`` to the perimeter (attained at a vertex)."""
        p = np.asarray(point, dtype=float)
        return float(np.max(np.linalg.norm(self.perimeter - p, axis=1)))

    @classmethod
    def from_dict(cls, data: dict) -> "Layout":
        return cls(
            perimeter=data["perimeter"],
            obstacles=data.get("obstacles", ()),
            default_rrcs=data.get("default_rrcs", 1.0),
        )

    def to_dict(self) -> dict:
        return {
            "perimeter": self.perimeter.tolist(),
            "obstacles": [o.tolist() for o in self.obstacles],
            "default_rrcs": self.default_rrcs,
        }


@dataclass(frozen=True)
class GridMap:
    """Rasterized layout: per-cell occupancy plus root radar cross section (m = sqrt(m^2)).

    ``occupancy`` and ``rrcs`` are flat arrays of length ``width * height``
    indexed by ``iy * width + ix``; ``rrcs`` is zero wherever ``occupancy`` is
    False.
    """

    origin: tuple
    resolution: float
    width: int
    height: int
    occupancy: np.ndarray
    rrcs: np.ndarray

    def __post_init__(self):
        if self.resolution <= 0:
            raise ValueError("resolution must be positive")
        n = self.width * self.height
        if self.occupancy.shape != (n,) or self.rrcs.shape != (n,):
            raise ValueError("occupancy/rrcs must be flat arrays of width*height")
        if np.any(self.rrcs[~self.occupancy] != 0.0):
            raise ValueError("rrcs must be zero on free cells")
        if np.any(self.rrcs < 0.0):
            raise ValueError("rrcs must be nonnegative")

    @property
    def n_cells(self) -> int:
        return self.width * self.height

    def cell_index(self, ix: int, iy: int) -> int:
        return iy * self.width + ix

    def cell_center(self, index: int) -> np.ndarray:
        iy, ix = divmod(int(index), self.width)
        return np.array(
            [
                self.origin[0] + (ix + 0.5) * self.resolution,
                self.origin[1] + (iy + 0.5) * self.resolution,
            ]
        )

    def cell_centers(self) -> np.ndarray:
        """(n_cells, 2) array of all cell centers, in flat-index order."""
        ix = np.arange(self.width)
        iy = np.arange(self.height)
        cx = self.origin[0] + (ix + 0.5) * self.resolution
        cy = self.origin[1] + (iy + 0.5) * self.resolution
        gx, gy = np.meshgrid(cx, cy)
        return np.column_stack([gx.ravel(), gy.ravel()])

    def cell_of_point(self, point) -> Optional[int]:
        ix = int(math.floor((point[0] - self.origin[0]) / self.resolution))
        iy = int(math.floor((point[1] - self.origin[1]) / self.resolution))
        if 0 <= ix < self.width and 0 <= iy < self.height:
            return self.cell_index(ix, iy)
        return None

    def in_extent(self, point) -> bool:
        x0, y0 = self.origin
        return (
            x0 <= point[0] <= x0 + self.width * self.resolution
            and y0 <= point[1] <= y0 + self.height * self.resolution
        )

    def occupancy_image(self) -> np.ndarray:
        """Occupancy as a (height, width) array, row 0 at the bottom."""
        return self.occupancy.reshape(self.height, self.width)


def rasterize_layout(layout: Layout, resolution: float, default_rrcs: float | None = None) -> GridMap:
    """Rasterize a layout onto a grid covering its bounding box.

    A cell is marked occupied when its center lies within ``resolution / 2`` of
    any polygon edge (perimeter or obstacle); occupied cells carry
    ``default_rrcs``, free cells zero.
    """
    if resolution <= 0:
        raise ValueError("resolution must be positive")
    if default_rrcs is None:
        default_rrcs = layout.default_rrcs
    if default_rrcs < 0:
        raise ValueError("default_rrcs must be nonnegative")

    x0, y0, x1, y1 = layout.bounding_box
    width = int(math.ceil((x1 - x0) / resolution - 1e-9))
    height = int(math.ceil((y1 - y0) / resolution - 1e-9))
    grid = GridMap(
        origin=(x0, y0),
        resolution=resolution,
        width=width,
        height=height,
        occupancy=np.zeros(width * height, dtype=bool),
        rrcs=np.zeros(width * height, dtype=float),
    )
    centers = grid.cell_centers()
    min_dist = np.full(len(centers), np.inf)
    for a, b in layout.all_edges():
        d, _ = _point_segment_distance(centers, a, b)
        np.minimum(min_dist, d, out=min_dist)
    occupancy = min_dist <= resolution / 2.0 + 1e-12
    rrcs = np.where(occupancy, float(default_rrcs), 0.0)
    occupancy.flags.writeable = False
    rrcs.flags.writeable = False
    return GridMap(
        origin=(x0, y0),
        resolution=resolution,
        width=width,
        height=height,
        occupancy=occupancy,
        rrcs=rrcs,
    )


def traverse_cells(grid: GridMap, start, direction_deg: float):
    """Yield flat indices of all cells crossed by a ray, in traversal order.

    Exact DDA traversal (Amanatides & Woo). When the ray passes exactly through
    a cell corner, both adjacent candidate cells are yielded in ascending flat
    index before stepping diagonally, which makes tie-breaking deterministic.
    """
    res = grid.resolution
    x0, y0 = grid.origin
    px = (start[0] - x0) / res
    py = (start[1] - y0) / res
    dx = math.cos(math.radians(direction_deg))
    dy = math.sin(math.radians(direction_deg))

    ix = min(int(math.floor(px)), grid.width - 1) if px >= 0 else -1
    iy = min(int(math.floor(py)), grid.height - 1) if py >= 0 else -1

    step_x = 1 if dx > 0 else -1
    step_y = 1 if dy > 0 else -1
    if dx != 0.0:
        next_x = (ix + 1) if dx > 0 else ix
        t_max_x = (next_x - px) / dx
        t_delta_x = abs(1.0 / dx)
    else:
        t_max_x, t_delta_x = math.inf, math.inf
    if dy != 0.0:
        next_y = (iy + 1) if dy > 0 else iy
        t_max_y = (next_y - py) / dy
        t_delta_y = abs(1.0 / dy)
    else:
        t_max_y, t_delta_y = math.inf, math.inf

    while 0 <= ix < grid.width and 0 <= iy < grid.height:
        yield grid.cell_index(ix, iy)
        if t_max_x < t_max_y:
            ix += step_x
            t_max_x += t_delta_x
        elif t_max_y < t_max_x:
            iy += step_y
            t_max_y += t_delta_y
        else:
            if t_max_x == math.inf:
                return
            # Corner crossing: visit both side cells (smaller index first).
            cand = []
            if 0 <= ix + step_x < grid.width and 0 <= iy < grid.height:
                cand.append(grid.cell_index(ix + step_x, iy))
            if 0 <= ix < grid.width and 0 <= iy + step_y < grid.height:
                cand.append(grid.cell_index(ix, iy + step_y))
            for c in sorted(cand):
                yield c
            ix += step_x
            iy += step_y
            t_max_x += t_delta_x
            t_max_y += t_delta_y


def ray_cast(grid: GridMap, pose: Pose, direction_deg: float):
    """First occupied cell hit by the ray from ``pose`` along an absolute bearing.

    Returns ``(flat index, Euclidean distance from the pose to the cell
    center)`` or ``None`` when the ray leaves the grid without touching an
    occupied cell.
    """
    p = pose.position
    if not grid.in_extent(p):
        raise ValueError(f"pose ({pose.x}, {pose.y}) is outside the grid extent")
    for idx in traverse_cells(grid, p, direction_deg):
        if grid.occupancy[idx]:
            center = grid.cell_center(idx)
            return idx, float(np.hypot(*(center - p)))
    return None


def perimeter_projection(layout: Layout, point):
    """Project a point onto the layout perimeter.

    Returns ``(d_p, s)``: the distance to the nearest perimeter edge and the
    arc-length coordinate (in ``[0, L)``, measured counter-clockwise from
    vertex 0) of the nearest perimeter point.
    """
    p = np.asarray(point, dtype=float)
    if not layout.contains(p):
        raise ValueError(f"point {tuple(p)} lies outside the perimeter")
    pp = p[None, :]
    best_d = math.inf
    best_s = 0.0
    n = len(layout.perimeter)
    for i in range(n):
        a = layout.perimeter[i]
        b = layout.perimeter[(i + 1) % n]
        d, t = _point_segment_distance(pp, a, b)
        if d[0] < best_d:
            best_d = float(d[0])
            best_s = layout._cum_lengths[i] + float(t[0]) * layout._edge_lengths[i]
    return best_d, best_s % layout.perimeter_length


def cells_in_shell(grid: GridMap, pose: Pose, steering_deg: float, pattern, r_lo: float, r_hi: float, weight_floor: float = 1e-6):
    """Cells whose center distance from the pose falls in ``[r_lo, r_hi)``.

    ``steering_deg`` is relative to the pose heading. Each returned tuple is
    ``(flat index, two-way gain weight, absolute bearing deg)``; weights below
    ``weight_floor`` times the pattern's two-way peak are omitted.
    """
    if r_lo < 0 or r_hi <= r_lo:
        raise ValueError("shell must satisfy 0 <= r_lo < r_hi")
    p = pose.position
    centers = grid.cell_centers()
    delta = centers - p
    d = np.hypot(delta[:, 0], delta[:, 1])
    in_shell = (d >= r_lo) & (d < r_hi)
    if not np.any(in_shell):
        return []
    idx = np.nonzero(in_shell)[0]
    bearings = np.degrees(np.arctan2(delta[idx, 1], delta[idx, 0]))
    rel = wrap_degrees(bearings - pose.heading_deg - steering_deg)
    weights = pattern.two_way_gain(rel)
    keep = weights >= weight_floor * pattern.peak_two_way
    return [
        (int(i), float(w), float(b))
        for i, w, b in zip(idx[keep], weights[keep], bearings[keep])
    ]


def truth_bitmap(grid: GridMap):
    """Ground-truth occupancy of a grid as a Bitmap-compatible triple."""
    return grid.occupancy.copy(), grid.width, grid.height
