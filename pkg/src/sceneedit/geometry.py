"""Geometric kernels for yaw-only oriented boxes in a z-up world."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, fields

import numpy as np

from .scene import OrientedBox, Pose, Vec3

# Base-face sampling pitch for the support ray test.
SUPPORT_PITCH = 0.02
SUPPORT_MIN_SAMPLES = 10


@dataclass(frozen=True)
class Tolerances:
    collision_eps: float = 0.01
    support_ratio: float = 0.60
    floor_contact: float = 0.10
    oob_expand: float = 0.10
    near_default: float = 0.75
    facing_cone: float = math.pi / 12

    def __post_init__(self):
        for f in fields(self):
            if getattr(self, f.name) < 0:
                raise ValueError(f"{f.name} must be non-negative")
        if not 0.0 < self.support_ratio <= 1.0:
            raise ValueError("support_ratio must lie in (0, 1]")

    def to_dict(self) -> dict:
        return asdict(self)


class DegenerateDirection(ValueError):
    pass


def _axes(box: OrientedBox):
    c, s = math.cos(box.yaw), math.sin(box.yaw)
    return (c, s), (-s, c)


def footprint(box: OrientedBox) -> list:
    """Four xy corners of the box footprint, counter-clockwise."""
    (ux, uy), (vx, vy) = _axes(box)
    hx, hy = box.half_extents.x, box.half_extents.y
    cx, cy = box.center.x, box.center.y
    return [
        (cx + sx * hx * ux + sy * hy * vx, cy + sx * hx * uy + sy * hy * vy)
        for sx, sy in ((-1, -1), (1, -1), (1, 1), (-1, 1))
    ]


def corners(box: OrientedBox) -> list:
    lo = box.center.z - box.half_extents.z
    hi = box.center.z + box.half_extents.z
    return [Vec3(x, y, z) for z in (lo, hi) for x, y in footprint(box)]


def top_z(box: OrientedBox) -> float:
    return box.center.z + box.half_extents.z


def bottom_z(box: OrientedBox) -> float:
    return box.center.z - box.half_extents.z


def _radius_on(box: OrientedBox, n) -> float:
    (ux, uy), (vx, vy) = _axes(box)
    return box.half_extents.x * abs(ux * n[0] + uy * n[1]) + box.half_extents.y * abs(vx * n[0] + vy * n[1])


def _xy_overlaps(a: OrientedBox, b: OrientedBox) -> list:
    out = []
    for n in (*_axes(a), *_axes(b)):
        ca = a.center.x * n[0] + a.center.y * n[1]
        cb = b.center.x * n[0] + b.center.y * n[1]
        ra, rb = _radius_on(a, n), _radius_on(b, n)
        out.append(min(ca + ra, cb + rb) - max(ca - ra, cb - rb))
    return out


def _z_overlap(a: OrientedBox, b: OrientedBox) -> float:
    return min(top_z(a), top_z(b)) - max(bottom_z(a), bottom_z(b))


def obb_penetration(a: OrientedBox, b: OrientedBox) -> float:
    """Smallest interval overlap over the separating-axis candidates; 0 when separated."""
    depth = min(min(_xy_overlaps(a, b)), _z_overlap(a, b))
    return depth if depth > 0.0 else 0.0


def obb_separation(a: OrientedBox, b: OrientedBox) -> float:
    """Largest gap along any candidate axis; 0 when the boxes touch or overlap."""
    gap = -min(min(_xy_overlaps(a, b)), _z_overlap(a, b))
    return gap if gap > 0.0 else 0.0


def intersects(a: OrientedBox, b: OrientedBox) -> bool:
    return obb_penetration(a, b) > 0.0


def colliding(a: OrientedBox, b: OrientedBox, tol: Tolerances) -> bool:
    return obb_penetration(a, b) > tol.collision_eps


def footprints_overlap(a: OrientedBox, b: OrientedBox) -> bool:
    return min(_xy_overlaps(a, b)) >= 0.0


def _base_samples(box: OrientedBox) -> np.ndarray:
    hx, hy = box.half_extents.x, box.half_extents.y
    nx = max(SUPPORT_MIN_SAMPLES, math.ceil(2 * hx / SUPPORT_PITCH))
    ny = max(SUPPORT_MIN_SAMPLES, math.ceil(2 * hy / SUPPORT_PITCH))
    lx = -hx + (np.arange(nx) + 0.5) * (2 * hx / nx)
    ly = -hy + (np.arange(ny) + 0.5) * (2 * hy / ny)
    gx, gy = np.meshgrid(lx, ly, indexing="ij")
    c, s = math.cos(box.yaw), math.sin(box.yaw)
    wx = box.center.x + c * gx - s * gy
    wy = box.center.y + s * gx + c * gy
    return np.stack([wx.ravel(), wy.ravel()], axis=1)


def support_ratio(obj: OrientedBox, surface: OrientedBox, eps: float = 0.01) -> float:
    """Fraction of downward rays from the object's base that land on the surface's top face."""
    gap = bottom_z(obj) - top_z(surface)
    if abs(gap) > eps:
        return 0.0
    if not footprints_overlap(obj, surface):
        return 0.0
    pts = _base_samples(obj)
    c, s = math.cos(surface.yaw), math.sin(surface.yaw)
    dx = pts[:, 0] - surface.center.x
    dy = pts[:, 1] - surface.center.y
    lx = c * dx + s * dy
    ly = -s * dx + c * dy
    tiny = 1e-12
    hit = (np.abs(lx) <= surface.half_extents.x + tiny) & (np.abs(ly) <= surface.half_extents.y + tiny)
    return float(np.count_nonzero(hit)) / len(pts)


def world_front(pose: Pose, front: Vec3) -> tuple:
    c, s = math.cos(pose.yaw), math.sin(pose.yaw)
    return (c * front.x - s * front.y, s * front.x + c * front.y)


def facing(actor_pose: Pose, actor_front: Vec3, target_center, cone: float) -> bool:
    fx, fy = world_front(actor_pose, actor_front)
    tx = target_center[0] - actor_pose.position.x
    ty = target_center[1] - actor_pose.position.y
    fn = math.hypot(fx, fy)
    tn = math.hypot(tx, ty)
    if tn < 1e-3:
        raise DegenerateDirection("target coincides with the actor in the xy plane")
    if fn < 1e-9:
        raise DegenerateDirection("front axis has no horizontal component")
    cos_angle = max(-1.0, min(1.0, (fx * tx + fy * ty) / (fn * tn)))
    return math.acos(cos_angle) <= cone + 1e-12


def yaw_towards(pose: Pose, front: Vec3, target_center) -> float:
    """Yaw that points the local front axis at the target (xy projection)."""
    want = math.atan2(target_center[1] - pose.position.y, target_center[0] - pose.position.x)
    have = math.atan2(front.y, front.x)
    return want - have


RELATIONS = ("left_of", "right_of", "in_front_of", "behind")
DEAD_BAND = 0.01


def view_offsets(obj, ref, view: Pose) -> tuple:
    """(lateral, depth) of obj relative to ref in the camera frame; +lateral is camera right, +depth away."""
    c, s = math.cos(view.yaw), math.sin(view.yaw)
    right = (c, s)
    forward = (-s, c)
    dx, dy = obj[0] - ref[0], obj[1] - ref[1]
    return dx * right[0] + dy * right[1], dx * forward[0] + dy * forward[1]


def relative_halfspace(obj, ref, view: Pose, relation: str) -> bool:
    lateral, depth = view_offsets(obj, ref, view)
    if relation == "left_of":
        return lateral < -DEAD_BAND
    if relation == "right_of":
        return lateral > DEAD_BAND
    if relation == "in_front_of":
        return depth < -DEAD_BAND
    if relation == "behind":
        return depth > DEAD_BAND
    raise ValueError(f"unknown relation {relation}")


def _point_segment(p, a, b) -> float:
    ax, ay = a
    bx, by = b
    dx, dy = bx - ax, by - ay
    ll = dx * dx + dy * dy
    t = 0.0 if ll == 0 else max(0.0, min(1.0, ((p[0] - ax) * dx + (p[1] - ay) * dy) / ll))
    return math.hypot(p[0] - (ax + t * dx), p[1] - (ay + t * dy))


def distance_xy(a: OrientedBox, b: OrientedBox) -> float:
    """Minimum distance between the two footprints; 0 when they overlap or touch."""
    if footprints_overlap(a, b):
        return 0.0
    pa, pb = footprint(a), footprint(b)
    best = math.inf
    for poly, other in ((pa, pb), (pb, pa)):
        for p in poly:
            for i in range(4):
                best = min(best, _point_segment(p, other[i], other[(i + 1) % 4]))
    return best


def segment_hits_box(p0, p1, box: OrientedBox, shrink: float = 0.0) -> bool:
    """Slab test of the segment p0-p1 against the box interior shrunk by ``shrink``."""
    c, s = math.cos(box.yaw), math.sin(box.yaw)

    def local(p):
        dx, dy, dz = p[0] - box.center.x, p[1] - box.center.y, p[2] - box.center.z
        return (c * dx + s * dy, -s * dx + c * dy, dz)

    a, b = local(p0), local(p1)
    t0, t1 = 0.0, 1.0
    for k, h in enumerate(box.half_extents):
        h = h - shrink
        if h <= 0:
            return False
        d = b[k] - a[k]
        if abs(d) < 1e-15:
            if abs(a[k]) > h:
                return False
            continue
        ta, tb = (-h - a[k]) / d, (h - a[k]) / d
        if ta > tb:
            ta, tb = tb, ta
        t0, t1 = max(t0, ta), min(t1, tb)
        if t0 > t1:
            return False
    return True


def point_in_box(p, box: OrientedBox) -> bool:
    c, s = math.cos(box.yaw), math.sin(box.yaw)
    dx, dy = p[0] - box.center.x, p[1] - box.center.y
    lx, ly = c * dx + s * dy, -s * dx + c * dy
    h = box.half_extents
    return abs(lx) <= h.x and abs(ly) <= h.y and abs(p[2] - box.center.z) <= h.z


def translate(box: OrientedBox, d) -> OrientedBox:
    return OrientedBox(Vec3(box.center.x + d[0], box.center.y + d[1], box.center.z + d[2]), box.half_extents, box.yaw)
