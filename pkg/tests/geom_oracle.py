"""Independent geometry oracles for the test suite.

Two deliberately different routes to the same answers: a scalar parametric
line solver (no cross-product shortcut, no vectorization) and shapely's
polygon predicates. Package code must agree with both.
"""

import math

from shapely.geometry import LineString, Point, Polygon


def ray_segment_distance(origin, angle, seg_a, seg_b):
    """Distance along the ray to a segment, or None.

    Solves the two scalar line equations directly: the ray as a point plus
    t * direction, the segment as a + u * (b - a), eliminating t by
    substitution rather than the cross-product form the package uses.
    """
    ox, oy = origin
    dx, dy = math.cos(angle), math.sin(angle)
    ax, ay = seg_a
    bx, by = seg_b
    ex, ey = bx - ax, by - ay
    denom = dx * ey - dy * ex
    if abs(denom) < 1e-14:
        return None
    u = (dx * (oy - ay) - dy * (ox - ax)) / denom
    if u < 0.0 or u > 1.0:
        return None
    if abs(dx) >= abs(dy):
        t = (ax + u * ex - ox) / dx
    else:
        t = (ay + u * ey - oy) / dy
    if t < 1e-12:
        return None
    return t


def ray_distance(origin, angle, segments, max_range):
    """First-hit distance over all wall segments, capped at max_range."""
    best = max_range
    for seg in segments:
        t = ray_segment_distance(origin, angle, seg[0], seg[1])
        if t is not None and t < best:
            best = t
    return best


def ray_distance_shapely(origin, angle, segments, max_range):
    """Same question answered by shapely intersection geometry."""
    ox, oy = origin
    tip = (ox + max_range * math.cos(angle), oy + max_range * math.sin(angle))
    ray = LineString([origin, tip])
    start = Point(origin)
    best = max_range
    for seg in segments:
        hit = ray.intersection(LineString([tuple(seg[0]), tuple(seg[1])]))
        if hit.is_empty:
            continue
        if hit.geom_type == "Point":
            points = [hit]
        elif hit.geom_type == "MultiPoint":
            points = list(hit.geoms)
        else:  # collinear overlap: nearest point of the overlap geometry
            points = [Point(c) for c in hit.coords]
        for p in points:
            d = start.distance(p)
            if 1e-12 < d < best:
                best = d
    return best


def rect_corners(pose_xy, theta, half_length, half_width, center_offset=0.0):
    """World-frame corners of a body rectangle, counterclockwise.

    center_offset shifts the rectangle center forward along the heading
    (the pose marks the body reference point, not necessarily the center).
    """
    px, py = pose_xy
    c, s = math.cos(theta), math.sin(theta)
    cx, cy = px + center_offset * c, py + center_offset * s
    out = []
    for bx, by in ((half_length, half_width), (-half_length, half_width),
                   (-half_length, -half_width), (half_length, -half_width)):
        out.append((cx + bx * c - by * s, cy + bx * s + by * c))
    return out


def rect_hits_walls_shapely(corners, segments):
    """True when the rectangle touches or crosses any wall segment."""
    poly = Polygon(corners)
    for seg in segments:
        if poly.intersects(LineString([tuple(seg[0]), tuple(seg[1])])):
            return True
    return False


def ray_rect_exit_distance(angle, x_min, x_max, y_min, y_max):
    """Distance from the origin to the rectangle boundary along a ray.

    The origin must be strictly inside. Answered by running the parametric
    segment solver over the four explicit boundary segments, not by slab
    arithmetic, so it cannot share a bug with the package's closed form.
    """
    assert x_min < 0.0 < x_max and y_min < 0.0 < y_max
    sides = (((x_min, y_min), (x_max, y_min)),
             ((x_max, y_min), (x_max, y_max)),
             ((x_max, y_max), (x_min, y_max)),
             ((x_min, y_max), (x_min, y_min)))
    best = None
    for a, b in sides:
        t = ray_segment_distance((0.0, 0.0), angle, a, b)
        if t is not None and (best is None or t < best):
            best = t
    assert best is not None, "interior origin must see the boundary"
    return best
