"""Low-level geometric primitives shared by the world model, executor, and searches."""

from __future__ import annotations

import math
from typing import NamedTuple, Sequence


class Pose(NamedTuple):
    """A 3D point in workspace units."""

    x: float
    y: float
    z: float


XYZ = Sequence[float]


def dist_xy(a: XYZ, b: XYZ) -> float:
    return math.hypot(a[0] - b[0], a[1] - b[1])


def dist3(a: XYZ, b: XYZ) -> float:
    return math.sqrt((a[0] - b[0]) ** 2 + (a[1] - b[1]) ** 2 + (a[2] - b[2]) ** 2)


def point_segment_distance(p: XYZ, a: XYZ, b: XYZ) -> float:
    """Distance from point p to the 3D segment ab."""
    ax, ay, az = a[0], a[1], a[2]
    dx, dy, dz = b[0] - ax, b[1] - ay, b[2] - az
    denom = dx * dx + dy * dy + dz * dz
    if denom <= 0.0:
        return dist3(p, a)
    t = ((p[0] - ax) * dx + (p[1] - ay) * dy + (p[2] - az) * dz) / denom
    t = 0.0 if t < 0.0 else (1.0 if t > 1.0 else t)
    return math.sqrt(
        (p[0] - (ax + t * dx)) ** 2
        + (p[1] - (ay + t * dy)) ** 2
        + (p[2] - (az + t * dz)) ** 2
    )


def _point_segment_distance_2d(px: float, py: float, ax: float, ay: float, bx: float, by: float) -> float:
    dx, dy = bx - ax, by - ay
    denom = dx * dx + dy * dy
    if denom <= 0.0:
        return math.hypot(px - ax, py - ay)
    t = ((px - ax) * dx + (py - ay) * dy) / denom
    t = 0.0 if t < 0.0 else (1.0 if t > 1.0 else t)
    return math.hypot(px - (ax + t * dx), py - (ay + t * dy))


def segment_segment_distance(p1: XYZ, p2: XYZ, q1: XYZ, q2: XYZ) -> float:
    """Minimum distance between 3D segments p1p2 and q1q2 (clamped closest-point method)."""
    d1 = (p2[0] - p1[0], p2[1] - p1[1], p2[2] - p1[2])
    d2 = (q2[0] - q1[0], q2[1] - q1[1], q2[2] - q1[2])
    r = (p1[0] - q1[0], p1[1] - q1[1], p1[2] - q1[2])
    a = d1[0] * d1[0] + d1[1] * d1[1] + d1[2] * d1[2]
    e = d2[0] * d2[0] + d2[1] * d2[1] + d2[2] * d2[2]
    f = d2[0] * r[0] + d2[1] * r[1] + d2[2] * r[2]
    eps = 1e-12
    if a <= eps and e <= eps:
        return dist3(p1, q1)
    if a <= eps:
        s = 0.0
        t = min(1.0, max(0.0, f / e))
    else:
        c = d1[0] * r[0] + d1[1] * r[1] + d1[2] * r[2]
        if e <= eps:
            t = 0.0
            s = min(1.0, max(0.0, -c / a))
        else:
            b = d1[0] * d2[0] + d1[1] * d2[1] + d1[2] * d2[2]
            denom = a * e - b * b
            s = min(1.0, max(0.0, (b * f - c * e) / denom)) if denom > eps else 0.0
            t = (b * s + f) / e
            if t < 0.0:
                t = 0.0
                s = min(1.0, max(0.0, -c / a))
            elif t > 1.0:
                t = 1.0
                s = min(1.0, max(0.0, (b - c) / a))
    cp = (p1[0] + d1[0] * s, p1[1] + d1[1] * s, p1[2] + d1[2] * s)
    cq = (q1[0] + d2[0] * t, q1[1] + d2[1] * t, q1[2] + d2[2] * t)
    return dist3(cp, cq)


def point_cylinder_clearance(p: XYZ, cx: float, cy: float, radius: float, height: float) -> float:
    """Signed distance from a point to the surface of a vertical floor-standing cylinder.

    Negative values are radial penetration depth (at the axis: -radius).
    """
    dxy = math.hypot(p[0] - cx, p[1] - cy)
    if p[2] <= height:
        return dxy - radius
    if dxy <= radius:
        return p[2] - height
    return math.hypot(dxy - radius, p[2] - height)


def segment_penetrates_cylinder(a: XYZ, b: XYZ, cx: float, cy: float, radius: float, height: float) -> bool:
    """True iff any point of segment ab lies strictly inside the solid cylinder."""
    az, bz = a[2], b[2]
    # Clip the segment to the z <= height slab; above the cap there is no solid.
    if az <= height and bz <= height:
        t0, t1 = 0.0, 1.0
    elif az > height and bz > height:
        return False
    else:
        tc = (height - az) / (bz - az)
        t0, t1 = (0.0, tc) if az <= height else (tc, 1.0)
    ax0 = a[0] + (b[0] - a[0]) * t0
    ay0 = a[1] + (b[1] - a[1]) * t0
    ax1 = a[0] + (b[0] - a[0]) * t1
    ay1 = a[1] + (b[1] - a[1]) * t1
    return _point_segment_distance_2d(cx, cy, ax0, ay0, ax1, ay1) < radius


def interpolate_path(waypoints: Sequence[XYZ], step: float) -> list[Pose]:
    """Piecewise-linear samples at spacing <= step; segment endpoints appear exactly once each."""
    if not waypoints:
        raise ValueError("empty waypoint list")
    first = waypoints[0]
    points = [Pose(first[0], first[1], first[2])]
    for a, b in zip(waypoints, waypoints[1:]):
        n = max(1, math.ceil(dist3(a, b) / step))
        for i in range(1, n):
            t = i / n
            points.append(
                Pose(a[0] + (b[0] - a[0]) * t, a[1] + (b[1] - a[1]) * t, a[2] + (b[2] - a[2]) * t)
            )
        points.append(Pose(b[0], b[1], b[2]))
    return points
