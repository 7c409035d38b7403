"""Author the bundled corridor tracks and write them as JSON worlds.

Each track is a centerline polyline plus a width. Walls are the two offset
chains with chamfered corners on both sides: the outside of a bend widens
where a long body swings out, and the poking corner on the inside of a bend
is cut back so the body can hug it. The start end is capped behind the
spawn; the far end stays open so side beams blow past the walls there and
trip the open-space check.

Every track is validated before writing: poses sampled along a fillet path
(straight legs joined by 1.1 m radius arcs, above the 0.877 m minimum
turning radius) must all be collision-free for the default footprint, so a
steering-bounded vehicle can actually drive it. Waypoints are resampled from
that same drivable path.

Run from the repo root to regenerate src/narrowsim/tracks/*.json:

    python demos/make_tracks.py
"""

import json
import math
import sys
from pathlib import Path

import numpy as np

sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "src"))

from narrowsim import Footprint, Pose2D, load_track, min_turning_radius, oracle_collides

OUT_DIR = Path(__file__).resolve().parents[1] / "src" / "narrowsim" / "tracks"
WIDTH = 1.2
SPAWN_S = 1.0
WAYPOINT_SPACING = 1.5
FILLET_RADIUS = 1.1
PATH_STEP = 0.05


def fillet_path(centerline, radius=FILLET_RADIUS, step=PATH_STEP):
    """Poses along straight legs joined by constant-radius corner arcs."""
    pts = [np.asarray(p, dtype=float) for p in centerline]
    dirs = [(b - a) / np.linalg.norm(b - a) for a, b in zip(pts[:-1], pts[1:])]

    poses = []

    def straight(a, b):
        d = b - a
        length = float(np.linalg.norm(d))
        if length < 1e-9:
            return
        yaw = math.atan2(d[1], d[0])
        for s in np.arange(0.0, length, step):
            p = a + (s / length) * d
            poses.append(Pose2D(p[0], p[1], yaw))

    cursor = pts[0]
    for i in range(1, len(pts) - 1):
        d0, d1 = dirs[i - 1], dirs[i]
        turn = math.atan2(d0[0] * d1[1] - d0[1] * d1[0], float(np.dot(d0, d1)))
        tangent = radius * math.tan(abs(turn) / 2.0)
        arc_in = pts[i] - d0 * tangent
        straight(cursor, arc_in)
        # arc center sits perpendicular to the incoming leg
        sign = 1.0 if turn > 0 else -1.0
        normal = np.array([-d0[1], d0[0]]) * sign
        center = arc_in + radius * normal
        yaw0 = math.atan2(d0[1], d0[0])
        n_arc = max(2, int(abs(turn) * radius / step))
        for j in range(n_arc + 1):
            a = abs(turn) * j / n_arc
            yaw = yaw0 + sign * a
            p = center - radius * normal_rot(normal, sign * a)
            poses.append(Pose2D(p[0], p[1], yaw))
        cursor = pts[i] + d1 * tangent
    straight(cursor, pts[-1])
    d = dirs[-1]
    poses.append(Pose2D(pts[-1][0], pts[-1][1], math.atan2(d[1], d[0])))
    return poses


def normal_rot(n, angle):
    c, s = math.cos(angle), math.sin(angle)
    return np.array([c * n[0] - s * n[1], s * n[0] + c * n[1]])


def _resample_path(poses, spacing):
    """[x, y] every `spacing` meters of arc length along a pose path."""
    out = []
    acc = 0.0
    prev = poses[0]
    for pose in poses[1:]:
        acc += math.hypot(pose.x - prev.x, pose.y - prev.y)
        if acc >= spacing:
            out.append([round(pose.x, 6), round(pose.y, 6)])
            acc = 0.0
        prev = pose
    last = [round(poses[-1].x, 6), round(poses[-1].y, 6)]
    # The endpoint always becomes the final waypoint; drop a spaced point
    # that landed within half a spacing of it so no near-duplicate remains.
    if out and math.hypot(out[-1][0] - last[0], out[-1][1] - last[1]) < spacing / 2:
        out.pop()
    if not out or out[-1] != last:
        out.append(last)
    return out


def _offset_chain(points, half_width, side, cut_scale=0.5):
    """One wall chain at signed offset, corners chamfered on both sides.

    side=+1 is the left wall. On the outside of a bend the chamfer spans the
    two offset-line endpoints; on the inside it cuts `cut` meters off each
    face around the miter point, carving back the corner that would otherwise
    poke into the swept path.
    """
    pts = np.asarray(points, dtype=float)
    dirs = np.diff(pts, axis=0)
    dirs = dirs / np.linalg.norm(dirs, axis=1, keepdims=True)
    normals = np.stack([-dirs[:, 1], dirs[:, 0]], axis=1) * side

    chain = [pts[0] + half_width * normals[0]]
    for i in range(1, len(pts) - 1):
        d0, d1 = dirs[i - 1], dirs[i]
        n0, n1 = normals[i - 1], normals[i]
        cross = d0[0] * d1[1] - d0[1] * d1[0]
        if abs(cross) < 1e-12:
            chain.append(pts[i] + half_width * n0)
            continue
        inner = (cross > 0) == (side > 0)
        if inner:
            turn = math.atan2(abs(cross), float(np.dot(d0, d1)))
            m = n0 + n1
            miter = pts[i] + half_width * (m / np.dot(m, m) * 2.0)
            cut = min(0.9, max(0.15, cut_scale * math.tan(turn / 2.0)))
            chain.append(miter - cut * d0)
            chain.append(miter + cut * d1)
        else:
            chain.append(pts[i] + half_width * n0)
            chain.append(pts[i] + half_width * n1)
    chain.append(pts[-1] + half_width * normals[-1])
    return [[round(float(x), 6), round(float(y), 6)] for x, y in chain]


def corridor_track(name, centerline, description, width=WIDTH):
    left = _offset_chain(centerline, width / 2, +1)
    right = _offset_chain(centerline, width / 2, -1)
    cap = [left[0], right[0]]
    path = fillet_path(centerline)
    spawn = next(p for i, p in enumerate(path) if i * PATH_STEP >= SPAWN_S)
    return {
        "name": name,
        "walls": [left, right, cap],
        "spawn": [round(spawn.x, 6), round(spawn.y, 6), round(spawn.theta, 6)],
        "exit_band": [left[-1], right[-1]],
        "description": description,
        "waypoints": _resample_path(path, WAYPOINT_SPACING),
    }


def bend(start, heading_deg, legs):
    """Centerline from straight legs: [(length, turn_deg_after), ...]."""
    pts = [list(start)]
    heading = math.radians(heading_deg)
    x, y = start
    for length, turn in legs:
        x += length * math.cos(heading)
        y += length * math.sin(heading)
        pts.append([round(x, 6), round(y, 6)])
        heading += math.radians(turn)
    return pts


CENTERLINES = {
    "corridor_straight": ([[0.0, 0.0], [10.0, 0.0]], "10 m straight corridor, 1.2 m wide", WIDTH),
    "track1": ([[0.0, 0.0], [7.0, 0.0]], "straight corridor", WIDTH),
    "track2": (bend((0.0, 0.0), 0, [(3.5, 45), (3.5, 0)]), "single 45 degree bend", WIDTH),
    "track3": (bend((0.0, 0.0), 0, [(3.5, 90), (3.5, 0)]), "single 90 degree bend", 1.3),
    "track4": (bend((0.0, 0.0), 0, [(3.0, 90), (3.0, -90), (3.0, 0)]),
               "S curve: left then right 90 degree bends", 1.3),
    "track5": (bend((0.0, 0.0), 0, [(3.0, 90), (2.6, 90), (3.0, 0)]),
               "U turn built from two 90 degree bends", 1.3),
    "track6": (bend((0.0, 0.0), 0, [(2.5, 45), (2.5, -45), (2.5, 45), (2.5, 0)]),
               "zigzag of alternating 45 degree bends", WIDTH),
    "track7": (bend((0.0, 0.0), 0, [(4.0, 135), (4.0, 0)]), "tight 135 degree bend", 1.5),
    "track8": (bend((0.0, 0.0), 0, [(3.0, 45), (2.8, 90), (2.8, -90), (2.8, -45), (3.0, 0)]),
               "mixed 45 and 90 degree bends", 1.3),
    "big_track": (bend((0.0, 0.0), 0, [(4.0, 45), (3.0, 90), (3.5, -90), (3.0, -45), (4.0, 0)]),
                  "long combination of straight, 45 and 90 degree sections", 1.3),
}


def validate(doc, centerline):
    world = load_track(doc)
    fp = Footprint()
    assert min_turning_radius(0.6) < FILLET_RADIUS
    assert not oracle_collides(world, world.spawn, fp), f"{doc['name']}: spawn collides"
    drivable = fillet_path(centerline)[int(SPAWN_S / PATH_STEP):]
    blocked = [p for p in drivable if oracle_collides(world, p, fp)]
    assert not blocked, (
        f"{doc['name']}: fillet path blocked at {len(blocked)} poses, "
        f"first ({blocked[0].x:.2f}, {blocked[0].y:.2f}, {math.degrees(blocked[0].theta):.0f} deg)")


def main():
    OUT_DIR.mkdir(parents=True, exist_ok=True)
    for name, (centerline, description, width) in CENTERLINES.items():
        doc = corridor_track(name, centerline, description, width=width)
        validate(doc, centerline)
        path = OUT_DIR / f"{name}.json"
        path.write_text(json.dumps(doc, indent=1) + "\n")
        world = load_track(path)
        print(f"{name}: {world.segments.shape[0]} wall segments, "
              f"{len(doc['waypoints'])} waypoints -> {path.name}")


if __name__ == "__main__":
    main()
