"""2D world geometry: poses, track worlds, footprints, raycasting, collision oracle.

Worlds are static collections of wall segments loaded from JSON track files.
All functions here are pure; a loaded TrackWorld is never mutated.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace
from importlib import resources
from pathlib import Path

import numpy as np

_PARALLEL_EPS = 1e-12
_MIN_RAY_T = 1e-12


def wrap_angle(theta: float) -> float:
    """Normalize an angle to (-pi, pi]."""
    t = (theta + math.pi) % (2.0 * math.pi) - math.pi
    if t <= -math.pi:
        t += 2.0 * math.pi
    return t


@dataclass(frozen=True)
class Pose2D:
    """Robot pose: position in meters, heading in radians (CCW from +x).

    Heading is normalized to (-pi, pi] on construction.
    """

    x: float
    y: float
    theta: float

    def __post_init__(self):
        object.__setattr__(self, "theta", wrap_angle(self.theta))

    def as_array(self) -> np.ndarray:
        return np.array([self.x, self.y, self.theta], dtype=float)

    @property
    def heading(self) -> np.ndarray:
        """Unit vector along the heading direction."""
        return np.array([math.cos(self.theta), math.sin(self.theta)])


@dataclass(frozen=True)
class Footprint:
    """Rectangular robot body plus sensor placement and safety inflation.

    length runs along the heading axis, width across it. lidar_offset is the
    signed distance of the lidar origin from the body center along heading
    (must keep the lidar inside the body). safety_margin inflates every side
    of the rectangle used for collision checks.
    """

    length: float = 1.0
    width: float = 0.6
    lidar_offset: float = 0.2
    safety_margin: float = 0.05

    def __post_init__(self):
        if self.length <= 0 or self.width <= 0:
            raise ValueError("footprint length and width must be positive")
        if self.safety_margin < 0:
            raise ValueError("safety_margin must be non-negative")
        if abs(self.lidar_offset) >= self.length / 2:
            raise ValueError("lidar must sit inside the body")

    @property
    def half_length(self) -> float:
        """Half-extent along heading, including the safety margin."""
        return self.length / 2 + self.safety_margin

    @property
    def half_width(self) -> float:
        """Half-extent across heading, including the safety margin."""
        return self.width / 2 + self.safety_margin

    def lidar_origin(self, pose: Pose2D) -> np.ndarray:
        """World position of the lidar for the given body pose."""
        return np.array(
            [
                pose.x + self.lidar_offset * math.cos(pose.theta),
                pose.y + self.lidar_offset * math.sin(pose.theta),
            ]
        )


@dataclass(frozen=True)
class TrackWorld:
    """A named set of wall segments with a spawn pose and an exit band.

    segments has shape (S, 2, 2): S walls, each (start, end), meters.
    exit_band is a single segment marking the open-space end of the track;
    it is annotation only and never blocks rays. waypoints optionally carries
    centerline points (Nx2) for waypoint-guided reward runs.
    """

    name: str
    segments: np.ndarray
    spawn: Pose2D
    exit_band: np.ndarray
    description: str = ""
    waypoints: np.ndarray | None = None

    def __post_init__(self):
        seg = np.asarray(self.segments, dtype=float)
        if seg.ndim != 3 or seg.shape[0] == 0 or seg.shape[1:] != (2, 2):
            raise ValueError("walls must be a non-empty (S, 2, 2) array")
        lengths = np.linalg.norm(seg[:, 1] - seg[:, 0], axis=1)
        if np.any(lengths <= 0):
            raise ValueError("every wall segment must have positive length")
        seg = seg.copy()
        seg.flags.writeable = False
        object.__setattr__(self, "segments", seg)
        band = np.asarray(self.exit_band, dtype=float).reshape(2, 2)
        band.flags.writeable = False
        object.__setattr__(self, "exit_band", band)
        if self.waypoints is not None:
            wps = np.asarray(self.waypoints, dtype=float).reshape(-1, 2)
            wps.flags.writeable = False
            object.__setattr__(self, "waypoints", wps)

    def transformed(self, dx: float, dy: float, dtheta: float) -> "TrackWorld":
        """Rigidly transform the whole world (rotation then translation)."""
        c, s = math.cos(dtheta), math.sin(dtheta)
        rot = np.array([[c, -s], [s, c]])
        seg = self.segments @ rot.T + np.array([dx, dy])
        band = self.exit_band @ rot.T + np.array([dx, dy])
        wps = None if self.waypoints is None else self.waypoints @ rot.T + np.array([dx, dy])
        spawn = Pose2D(
            c * self.spawn.x - s * self.spawn.y + dx,
            s * self.spawn.x + c * self.spawn.y + dy,
            self.spawn.theta + dtheta,
        )
        return replace(self, segments=seg, spawn=spawn, exit_band=band, waypoints=wps)


def _expand_polylines(polylines) -> np.ndarray:
    segs = []
    for line in polylines:
        pts = np.asarray(line, dtype=float)
        if pts.ndim != 2 or pts.shape[0] < 2 or pts.shape[1] != 2:
            raise ValueError("each polyline needs at least two [x, y] points")
        for a, b in zip(pts[:-1], pts[1:]):
            segs.append((a, b))
    if not segs:
        raise ValueError("track has no wall segments")
    return np.array(segs, dtype=float)


def load_track(source) -> TrackWorld:
    """Load a TrackWorld from a JSON track file, path, or parsed dict.

    Schema: {"name", "walls": [[[x, y], ...], ...], "spawn": [x, y, theta],
    "exit_band": [[x1, y1], [x2, y2]], "description"}.
    """
    if isinstance(source, (str, Path)):
        with open(source) as fh:
            doc = json.load(fh)
    else:
        doc = source
    wps = doc.get("waypoints")
    return TrackWorld(
        name=doc["name"],
        segments=_expand_polylines(doc["walls"]),
        spawn=Pose2D(*doc["spawn"]),
        exit_band=np.asarray(doc["exit_band"], dtype=float),
        description=doc.get("description", ""),
        waypoints=None if wps is None else np.asarray(wps, dtype=float),
    )


def bundled_track_names() -> list[str]:
    """Names of the track files shipped with the package."""
    root = resources.files("narrowsim").joinpath("tracks")
    return sorted(p.name[: -len(".json")] for p in root.iterdir() if p.name.endswith(".json"))


def load_bundled_track(name: str) -> TrackWorld:
    """Load one of the bundled tracks by name (see bundled_track_names)."""
    path = resources.files("narrowsim").joinpath("tracks", f"{name}.json")
    with path.open() as fh:
        return load_track(json.load(fh))


def _ray_segment_hits(origin: np.ndarray, dirs: np.ndarray, segments: np.ndarray) -> np.ndarray:
    """Distances from origin to each segment along each ray direction.

    dirs: (R, 2) unit vectors, segments: (S, 2, 2). Returns (R, S) with +inf
    where a ray misses a segment. Rays graze past exactly-parallel walls.
    """
    a = segments[:, 0]
    s = segments[:, 1] - segments[:, 0]
    ao = a - origin

    # denom[r, k] = dirs[r] x s[k]
    denom = dirs[:, 0, None] * s[None, :, 1] - dirs[:, 1, None] * s[None, :, 0]
    cross_ao_s = ao[:, 0] * s[:, 1] - ao[:, 1] * s[:, 0]
    cross_ao_d = ao[None, :, 0] * dirs[:, 1, None] - ao[None, :, 1] * dirs[:, 0, None]

    with np.errstate(divide="ignore", invalid="ignore"):
        t = cross_ao_s[None, :] / denom
        u = cross_ao_d / denom

    valid = (np.abs(denom) > _PARALLEL_EPS) & (t > _MIN_RAY_T) & (u >= 0.0) & (u <= 1.0)
    return np.where(valid, t, np.inf)


def cast_ray(world: TrackWorld, origin, angle: float, max_range: float) -> float:
    """Distance to the nearest wall along a single ray, capped at max_range."""
    if max_range <= 0:
        raise ValueError("max_range must be positive")
    d = np.array([[math.cos(angle), math.sin(angle)]])
    hits = _ray_segment_hits(np.asarray(origin, dtype=float), d, world.segments)
    return float(min(hits.min(), max_range))


def scan(
    world: TrackWorld,
    pose: Pose2D,
    footprint: Footprint,
    n_scans: int,
    max_range: float,
) -> np.ndarray:
    """Simulated planar lidar sweep from the robot's lidar origin.

    Returns n_scans ranges clamped to [0, max_range]. Beam 0 points along the
    robot heading; indices increase counter-clockwise at 2*pi/n_scans steps.
    """
    if n_scans < 8:
        raise ValueError("n_scans must be at least 8")
    angles = pose.theta + 2.0 * math.pi * np.arange(n_scans) / n_scans
    dirs = np.stack([np.cos(angles), np.sin(angles)], axis=1)
    origin = footprint.lidar_origin(pose)
    hits = _ray_segment_hits(origin, dirs, world.segments)
    return np.minimum(hits.min(axis=1), max_range)


def footprint_polygon(pose: Pose2D, footprint: Footprint) -> np.ndarray:
    """Inflated body rectangle corners in the world frame, counter-clockwise.

    Order: front-right, front-left, back-left, back-right.
    """
    hl, hw = footprint.half_length, footprint.half_width
    local = np.array([[hl, -hw], [hl, hw], [-hl, hw], [-hl, -hw]])
    c, s = math.cos(pose.theta), math.sin(pose.theta)
    rot = np.array([[c, -s], [s, c]])
    return local @ rot.T + np.array([pose.x, pose.y])


def oracle_collides(world: TrackWorld, pose: Pose2D, footprint: Footprint) -> bool:
    """Exact inflated-rectangle vs wall-segment overlap test (touching counts).

    Ground truth for benchmarking scan-based collision detectors: transforms
    every wall into the body frame and slab-clips it against the axis-aligned
    inflated rectangle.
    """
    c, s = math.cos(pose.theta), math.sin(pose.theta)
    # world -> body frame: translate then rotate by -theta
    shifted = world.segments - np.array([pose.x, pose.y])
    p0 = np.stack([c * shifted[:, 0, 0] + s * shifted[:, 0, 1],
                   -s * shifted[:, 0, 0] + c * shifted[:, 0, 1]], axis=1)
    p1 = np.stack([c * shifted[:, 1, 0] + s * shifted[:, 1, 1],
                   -s * shifted[:, 1, 0] + c * shifted[:, 1, 1]], axis=1)

    lo = np.array([-footprint.half_length, -footprint.half_width])
    hi = np.array([footprint.half_length, footprint.half_width])

    d = p1 - p0
    with np.errstate(divide="ignore", invalid="ignore"):
        t_lo = (lo - p0) / d
        t_hi = (hi - p0) / d
    near = np.minimum(t_lo, t_hi)
    far = np.maximum(t_lo, t_hi)

    # Degenerate axis (segment parallel to a slab): inside-slab check instead.
    parallel = np.abs(d) <= _PARALLEL_EPS
    inside = (p0 >= lo) & (p0 <= hi)
    near = np.where(parallel, np.where(inside, -np.inf, np.inf), near)
    far = np.where(parallel, np.where(inside, np.inf, -np.inf), far)

    t_enter = np.maximum(near[:, 0], near[:, 1])
    t_exit = np.minimum(far[:, 0], far[:, 1])
    hit = (t_enter <= t_exit) & (t_exit >= 0.0) & (t_enter <= 1.0)
    return bool(np.any(hit))


def point_segment_distance(point: np.ndarray, seg: np.ndarray) -> float:
    """Euclidean distance from a point to a segment (seg shape (2, 2))."""
    a, b = seg[0], seg[1]
    ab = b - a
    t = float(np.dot(point - a, ab) / np.dot(ab, ab))
    t = min(1.0, max(0.0, t))
    return float(np.linalg.norm(a + t * ab - point))
