"""Rectangle-aware scan discretization and collision detection.

The robot state is a small set of lidar beams selected so that their hit
points, at the per-beam safe range, evenly cover the four sides of an
inflated body rectangle. Each selected beam stores the exact distance from
the lidar origin to that rectangle along the beam's own angle; a reading at
or below it means some part of the body rectangle is in contact. Two
fixed-interval baselines (constant range, and rectangle-fitted ranges) share
the table type so detectors are interchangeable in benchmarks.

Beam geometry is expressed in the lidar frame: origin at the sensor, angle 0
along the robot heading, angles increasing counter-clockwise.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .geometry import Footprint


@dataclass(frozen=True)
class SafetyRegionTable:
    """Selected beam indices with per-beam safe ranges.

    indices: raw-scan indices, unique, sorted by angle (position 0 is always
    the forward beam). ranges: exact lidar-to-rectangle distance along each
    indexed beam, parallel to indices. n_scans: size of the raw sweep the
    indices point into. phase_boundaries: the 8 axis/diagonal angles that
    partition the rectangle boundary.
    """

    indices: np.ndarray
    ranges: np.ndarray
    n_scans: int
    resolution: float
    phase_boundaries: np.ndarray

    def __post_init__(self):
        idx = np.asarray(self.indices, dtype=np.int64)
        rng = np.asarray(self.ranges, dtype=float)
        if idx.shape != rng.shape or idx.ndim != 1 or idx.size == 0:
            raise ValueError("indices and ranges must be parallel 1D arrays")
        if np.unique(idx).size != idx.size:
            raise ValueError("indices must be unique")
        if np.any(np.diff(idx) <= 0):
            raise ValueError("indices must be sorted ascending")
        if np.any((idx < 0) | (idx >= self.n_scans)):
            raise ValueError("indices out of raw sweep bounds")
        if np.any(rng <= 0):
            raise ValueError("safe ranges must be positive")
        for name, arr in (("indices", idx), ("ranges", rng),
                          ("phase_boundaries", np.asarray(self.phase_boundaries, dtype=float))):
            arr.flags.writeable = False
            object.__setattr__(self, name, arr)

    def __len__(self) -> int:
        return int(self.indices.size)

    @property
    def angles(self) -> np.ndarray:
        """Beam angles in the lidar frame, radians in [0, 2*pi)."""
        return self.indices * (2.0 * math.pi / self.n_scans)

    def position_of(self, raw_index: int) -> int:
        """Table position holding the given raw-scan index."""
        pos = int(np.searchsorted(self.indices, raw_index))
        if pos >= len(self) or self.indices[pos] != raw_index:
            raise KeyError(f"raw index {raw_index} not in table")
        return pos

    def dump(self) -> str:
        """Human-readable listing: position, raw index, angle, safe range."""
        lines = ["pos,raw_index,angle_deg,range_m"]
        for p, (i, a, r) in enumerate(zip(self.indices, np.degrees(self.angles), self.ranges)):
            lines.append(f"{p},{i},{a:.4f},{r:.9f}")
        return "\n".join(lines) + "\n"


@dataclass(frozen=True)
class Observation:
    """Ranges of the selected beams, in table order, plus optional extras.

    extras is empty except in waypoint-guided mode, where it carries
    [distance to active waypoint, yaw difference to it].
    """

    v_obs: np.ndarray
    extras: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.v_obs, dtype=float)
        e = np.asarray(self.extras, dtype=float).reshape(-1)
        v.flags.writeable = False
        e.flags.writeable = False
        object.__setattr__(self, "v_obs", v)
        object.__setattr__(self, "extras", e)

    def __len__(self) -> int:
        return int(self.v_obs.size + self.extras.size)

    def as_vector(self) -> np.ndarray:
        return np.concatenate([self.v_obs, self.extras])


def _body_rect(footprint: Footprint) -> tuple[float, float, float, float]:
    """Inflated rectangle bounds (xlo, xhi, ylo, yhi) in the lidar frame."""
    cx = -footprint.lidar_offset
    hl, hw = footprint.half_length, footprint.half_width
    return cx - hl, cx + hl, -hw, hw


def _rect_range(angle: float, xlo: float, xhi: float, ylo: float, yhi: float) -> float:
    """Distance from the (interior) origin to the rectangle along a beam."""
    dx, dy = math.cos(angle), math.sin(angle)
    tx = math.inf if dx == 0.0 else (xhi if dx > 0.0 else xlo) / dx
    ty = math.inf if dy == 0.0 else (yhi if dy > 0.0 else ylo) / dy
    return min(tx, ty)


def _nearest_index(angle: float, inc: float, n_scans: int) -> int:
    # Nearest beam with ties resolved to the lower index.
    return int(math.ceil(angle / inc - 0.5)) % n_scans


def build_table(footprint: Footprint, n_scans: int, resolution: float) -> SafetyRegionTable:
    """Build the rectangle-covering beam table.

    Walks the four sides of the inflated body rectangle placing sample points
    at most `resolution` apart (corners included), adds the 8 mandatory
    directions (the four lidar-frame axes and the four corner diagonals),
    maps every sample to the nearest raw beam, and stores the exact
    lidar-to-rectangle distance along that beam's true angle. Duplicate beams
    collapse keeping the largest range, which flags incursions earliest.

    Args:
        footprint: body rectangle, sensor placement, inflation margin.
        n_scans: raw sweep size the indices refer to.
        resolution: max spacing between adjacent side sample points, meters.

    Returns:
        Table sorted by beam angle; length depends on footprint, resolution,
        and sweep density, not fixed in advance.
    """
    if resolution <= 0:
        raise ValueError("resolution must be positive")
    if n_scans < 8:
        raise ValueError("n_scans must be at least 8")

    xlo, xhi, ylo, yhi = _body_rect(footprint)
    corners = [(xhi, ylo), (xhi, yhi), (xlo, yhi), (xlo, ylo)]
    sides = list(zip(corners, corners[1:] + corners[:1]))

    sample_angles: list[float] = []
    for (ax, ay), (bx, by) in sides:
        n = max(1, math.ceil(math.hypot(bx - ax, by - ay) / resolution))
        for i in range(n + 1):
            t = i / n
            sample_angles.append(math.atan2(ay + t * (by - ay), ax + t * (bx - ax)))
    sample_angles.extend([0.0, math.pi / 2, math.pi, -math.pi / 2])
    phase = [0.0, math.pi / 2, math.pi, -math.pi / 2]
    for cx, cy in corners:
        a = math.atan2(cy, cx)
        sample_angles.append(a)
        phase.append(a)

    inc = 2.0 * math.pi / n_scans
    best: dict[int, float] = {}
    for a in sample_angles:
        idx = _nearest_index(a, inc, n_scans)
        rng = _rect_range(idx * inc, xlo, xhi, ylo, yhi)
        if rng > best.get(idx, -math.inf):
            best[idx] = rng

    indices = np.array(sorted(best), dtype=np.int64)
    ranges = np.array([best[i] for i in indices], dtype=float)
    boundaries = np.sort(np.mod(phase, 2.0 * math.pi))
    return SafetyRegionTable(indices, ranges, n_scans, resolution, boundaries)


def _fixed_interval_indices(n_scans: int, n_select: int) -> np.ndarray:
    if not 1 <= n_select <= n_scans:
        raise ValueError("n_select must be in [1, n_scans]")
    idx = np.unique((np.arange(n_select) * n_scans) // n_select)
    return idx.astype(np.int64)


def build_baseline_fifr(footprint: Footprint, n_scans: int, n_select: int | None = None) -> SafetyRegionTable:
    """Fixed-interval, fixed-range baseline table.

    Evenly spaced beams, every safe range the same constant covering only the
    body width (half width plus margin), regardless of beam direction.
    """
    n_select = n_scans if n_select is None else n_select
    indices = _fixed_interval_indices(n_scans, n_select)
    ranges = np.full(indices.shape, footprint.half_width, dtype=float)
    return SafetyRegionTable(indices, ranges, n_scans, math.nan, np.zeros(0))


def build_baseline_firect(footprint: Footprint, n_scans: int, n_select: int | None = None) -> SafetyRegionTable:
    """Fixed-interval, rectangle-fitted baseline table.

    Same evenly spaced beams as the fixed-range baseline, but each safe range
    is the exact lidar-to-rectangle distance along its beam. Differs from the
    adaptive table only in where the beams point.
    """
    n_select = n_scans if n_select is None else n_select
    indices = _fixed_interval_indices(n_scans, n_select)
    xlo, xhi, ylo, yhi = _body_rect(footprint)
    inc = 2.0 * math.pi / n_scans
    ranges = np.array([_rect_range(i * inc, xlo, xhi, ylo, yhi) for i in indices], dtype=float)
    return SafetyRegionTable(indices, ranges, n_scans, math.nan, np.zeros(0))


def observe(table: SafetyRegionTable, raw_scans: np.ndarray, extras=()) -> Observation:
    """Select the table's beams out of a raw sweep."""
    raw = np.asarray(raw_scans, dtype=float)
    if raw.shape != (table.n_scans,):
        raise ValueError(f"expected {table.n_scans} raw scans, got {raw.shape}")
    return Observation(raw[table.indices], np.asarray(extras, dtype=float))


def detect_collision(table: SafetyRegionTable, raw_scans: np.ndarray) -> bool:
    """True when any selected beam reads at or below its safe range."""
    raw = np.asarray(raw_scans, dtype=float)
    if raw.shape != (table.n_scans,):
        raise ValueError(f"expected {table.n_scans} raw scans, got {raw.shape}")
    return bool(np.any(raw[table.indices] <= table.ranges))
