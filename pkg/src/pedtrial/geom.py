"""Planar geometry helpers shared by scenario construction and the engine.

Conventions used throughout the package:

* The path frame has +Y along the nominal walking path and +X to the
  subject's right; the origin sits at the trial start.
* Headings and bearings are degrees measured from +Y, positive toward +X
  (i.e. positive = to the right of straight ahead).
* All angles are normalized to the half-open interval (-180, 180].
"""

from __future__ import annotations

import math

Vec2 = tuple[float, float]


def normalize_deg(angle: float) -> float:
    """Map an angle in degrees onto (-180, 180]."""
    a = math.fmod(angle, 360.0)
    if a <= -180.0:
        a += 360.0
    elif a > 180.0:
        a -= 360.0
    # fmod(-180.0, 360) is -180.0 exactly; fold it to +180
    return 180.0 if a == -180.0 else a


def heading_vec(heading_deg: float) -> Vec2:
    """Unit vector for a heading measured from +Y, positive toward +X."""
    r = math.radians(heading_deg)
    return (math.sin(r), math.cos(r))


def bearing_deg(origin: Vec2, gaze_heading_deg: float, target: Vec2) -> float:
    """Signed bearing of ``target`` seen from ``origin`` along a gaze heading.

    Positive bearings are to the right of the gaze direction.
    """
    ux = target[0] - origin[0]
    uy = target[1] - origin[1]
    gx, gy = heading_vec(gaze_heading_deg)
    # atan2(cross, dot) is CCW-positive; negate for right-positive.
    ang = -math.degrees(math.atan2(gx * uy - gy * ux, gx * ux + gy * uy))
    return normalize_deg(ang)


def dist(a: Vec2, b: Vec2) -> float:
    return math.hypot(a[0] - b[0], a[1] - b[1])


def closest_approach(
    rel_pos: Vec2, rel_vel: Vec2, t_max: float = math.inf
) -> tuple[float, float]:
    """Closest approach of two constant-velocity points.

    ``rel_pos``/``rel_vel`` are position and velocity of one point relative
    to the other. Returns ``(d_min, t_star)`` where ``t_star`` is clamped to
    ``[0, t_max]``. With zero relative velocity the answer is the current
    separation at ``t_star = 0``.
    """
    dx, dy = rel_pos
    vx, vy = rel_vel
    v2 = vx * vx + vy * vy
    if v2 < 1e-18:
        t_star = 0.0
    else:
        t_star = -(dx * vx + dy * vy) / v2
        t_star = min(max(t_star, 0.0), t_max)
    return math.hypot(dx + vx * t_star, dy + vy * t_star), t_star


def angular_size_deg(radius: float, distance: float) -> float:
    """Full angular size of a disc of ``radius`` at ``distance`` (degrees)."""
    if distance <= 0.0:
        return 180.0
    return 2.0 * math.degrees(math.atan(radius / distance))


def splitmix64(seed: int) -> int:
    """One step of the splitmix64 mixer; used to derive independent seeds."""
    z = (seed + 0x9E3779B97F4A7C15) & 0xFFFFFFFFFFFFFFFF
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & 0xFFFFFFFFFFFFFFFF
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & 0xFFFFFFFFFFFFFFFF
    return z ^ (z >> 31)


def derive_seed(seed: int, *streams: int) -> int:
    """Deterministically derive a 64-bit sub-seed for a numbered stream."""
    z = seed & 0xFFFFFFFFFFFFFFFF
    for s in streams:
        z = splitmix64(z ^ splitmix64(s & 0xFFFFFFFFFFFFFFFF))
    return z
