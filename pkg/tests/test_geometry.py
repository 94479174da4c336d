import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from sceneedit.geometry import (
    DegenerateDirection,
    Tolerances,
    colliding,
    corners,
    distance_xy,
    facing,
    footprint,
    intersects,
    obb_penetration,
    point_in_box,
    relative_halfspace,
    segment_hits_box,
    support_ratio,
)
from sceneedit.scene import OrientedBox, Pose, Vec3

TOL = Tolerances()


def box(x, y, z, hx, hy, hz, yaw=0.0):
    return OrientedBox(Vec3(x, y, z), Vec3(hx, hy, hz), yaw)


def sample_in(b, n, rng):
    """Uniform points inside a yaw-only box."""
    local = rng.uniform(-1, 1, size=(n, 3)) * np.array(b.half_extents)
    c, s = math.cos(b.yaw), math.sin(b.yaw)
    x = b.center.x + c * local[:, 0] - s * local[:, 1]
    y = b.center.y + s * local[:, 0] + c * local[:, 1]
    return np.stack([x, y, b.center.z + local[:, 2]], axis=1)


def inside(b, pts):
    c, s = math.cos(b.yaw), math.sin(b.yaw)
    dx, dy = pts[:, 0] - b.center.x, pts[:, 1] - b.center.y
    lx, ly = c * dx + s * dy, -s * dx + c * dy
    h = b.half_extents
    return (np.abs(lx) <= h.x) & (np.abs(ly) <= h.y) & (np.abs(pts[:, 2] - b.center.z) <= h.z)


# -- thresholds --------------------------------------------------------------


def test_half_centimetre_overlap_is_not_a_collision():
    a = box(0, 0, 0.5, 0.5, 0.5, 0.5)
    b = box(0.995, 0, 0.5, 0.5, 0.5, 0.5)
    assert obb_penetration(a, b) == pytest.approx(0.005)
    assert not colliding(a, b, TOL)


def test_two_centimetre_overlap_collides():
    a = box(0, 0, 0.5, 0.5, 0.5, 0.5)
    b = box(0.98, 0, 0.5, 0.5, 0.5, 0.5)
    assert obb_penetration(a, b) == pytest.approx(0.02)
    assert colliding(a, b, TOL)


def test_touching_faces_do_not_intersect():
    a = box(0, 0, 0.5, 0.5, 0.5, 0.5)
    assert not intersects(a, box(1.0, 0, 0.5, 0.5, 0.5, 0.5))
    assert not intersects(a, box(0, 0, 1.5, 0.5, 0.5, 0.5))


@pytest.mark.parametrize("fraction, supported", [(0.55, False), (0.65, True), (0.60, True), (1.0, True)])
def test_support_ratio_boundaries(fraction, supported):
    surface = box(0, 0, 0.4, 0.5, 0.5, 0.4)
    # Object base is 0.4 wide; shift it so `fraction` of it stays over the surface edge at x=0.5.
    cx = 0.5 - 0.4 * fraction + 0.2
    obj = box(cx, 0, 0.9, 0.2, 0.2, 0.1)
    r = support_ratio(obj, surface)
    assert r == pytest.approx(fraction, abs=0.03)
    assert (r >= TOL.support_ratio) == supported


def test_support_needs_contact_height():
    surface = box(0, 0, 0.4, 0.5, 0.5, 0.4)
    assert support_ratio(box(0, 0, 0.9, 0.2, 0.2, 0.1), surface) == 1.0
    assert support_ratio(box(0, 0, 0.9 + 0.05, 0.2, 0.2, 0.1), surface) == 0.0


def test_rotated_support_matches_area_fraction():
    # A 45-degree diamond centred on the corner of a square surface covers a quarter of its area.
    surface = box(0, 0, 0.5, 0.5, 0.5, 0.5)
    obj = box(0.5, 0.5, 1.1, 0.2, 0.2, 0.1, math.pi / 4)
    assert support_ratio(obj, surface) == pytest.approx(0.25, abs=0.03)


# -- oracles -------------------------------------------------------------------


def test_obb_decisions_agree_with_point_sampling():
    rng = np.random.default_rng(7)
    agree = total = 0
    while total < 1000:
        a = box(*rng.uniform(-1, 1, 2), rng.uniform(0, 1), *rng.uniform(0.05, 0.8, 3), rng.uniform(0, 2 * math.pi))
        b = box(*rng.uniform(-1, 1, 2), rng.uniform(0, 1), *rng.uniform(0.05, 0.8, 3), rng.uniform(0, 2 * math.pi))
        pa, pb = sample_in(a, 10_000, rng), sample_in(b, 10_000, rng)
        overlap = inside(b, pa).any() or inside(a, pb).any()
        # Skip pairs whose boundary gap or overlap is within 5mm: sampling cannot resolve those.
        grown = OrientedBox(a.center, Vec3(*(h + 0.005 for h in a.half_extents)), a.yaw)
        shrunk = OrientedBox(a.center, Vec3(*(max(h - 0.005, 1e-4) for h in a.half_extents)), a.yaw)
        if intersects(grown, b) != intersects(shrunk, b):
            continue
        total += 1
        agree += intersects(a, b) == overlap
    assert agree / total >= 0.995


@settings(max_examples=200, deadline=None)
@given(
    st.floats(-2, 2), st.floats(-2, 2), st.floats(0.05, 1), st.floats(0.05, 1), st.floats(0, 2 * math.pi),
    st.floats(-2, 2), st.floats(-2, 2), st.floats(0.05, 1), st.floats(0.05, 1),
)
def test_axis_aligned_penetration_matches_interval_overlap(x, y, hx, hy, yaw, x2, y2, hx2, hy2):
    a = box(x, y, 0.5, hx, hy, 0.5)
    b = box(x2, y2, 0.5, hx2, hy2, 0.5)
    ox = min(x + hx, x2 + hx2) - max(x - hx, x2 - hx2)
    oy = min(y + hy, y2 + hy2) - max(y - hy, y2 - hy2)
    want = max(0.0, min(ox, oy, 1.0))
    assert obb_penetration(a, b) == pytest.approx(want, abs=1e-9)


@settings(max_examples=200, deadline=None)
@given(st.floats(0, 2 * math.pi), st.floats(-3, 3), st.floats(-3, 3), st.floats(0, 2 * math.pi))
def test_penetration_is_invariant_under_rigid_motion(theta, tx, ty, yaw):
    a = box(0.3, -0.2, 0.5, 0.4, 0.2, 0.5, yaw)
    b = box(0.7, 0.1, 0.4, 0.3, 0.3, 0.4, yaw + 0.3)

    def move(bx):
        c, s = math.cos(theta), math.sin(theta)
        cx = c * bx.center.x - s * bx.center.y + tx
        cy = s * bx.center.x + c * bx.center.y + ty
        return OrientedBox(Vec3(cx, cy, bx.center.z), bx.half_extents, bx.yaw + theta)

    assert obb_penetration(move(a), move(b)) == pytest.approx(obb_penetration(a, b), abs=1e-9)


def test_corners_match_change_of_basis():
    b = box(1.0, 2.0, 0.5, 0.4, 0.2, 0.5, math.pi / 6)
    c, s = math.cos(math.pi / 6), math.sin(math.pi / 6)
    want = set()
    for sz in (-1, 1):
        for sx in (-1, 1):
            for sy in (-1, 1):
                lx, ly = 0.4 * sx, 0.2 * sy
                want.add((round(1.0 + c * lx - s * ly, 9), round(2.0 + s * lx + c * ly, 9), round(0.5 + 0.5 * sz, 9)))
    got = {tuple(round(v, 9) for v in p) for p in corners(b)}
    assert got == want
    assert len(footprint(b)) == 4


def test_distance_xy_matches_sampling():
    rng = np.random.default_rng(3)
    for _ in range(30):
        a = box(*rng.uniform(-1, 1, 2), 0.5, *rng.uniform(0.1, 0.4, 2), 0.5, rng.uniform(0, 6.28))
        b = box(*rng.uniform(1.5, 2.5, 2), 0.5, *rng.uniform(0.1, 0.4, 2), 0.5, rng.uniform(0, 6.28))
        pa, pb = sample_in(a, 3000, rng)[:, :2], sample_in(b, 3000, rng)[:, :2]
        # Sampled pairwise minimum is an upper bound that converges from above.
        sampled = np.min(np.linalg.norm(pa[:200, None, :] - pb[None, :200, :], axis=2))
        d = distance_xy(a, b)
        assert d <= sampled + 1e-9
        assert d >= sampled - 0.15


# -- direction helpers -----------------------------------------------------------


def test_facing_cone_edges():
    pose = Pose((0, 0, 0), 0.0)
    front = Vec3(0, 1, 0)
    assert facing(pose, front, (0, 5, 0), TOL.facing_cone)
    ang = TOL.facing_cone - 0.01
    assert facing(pose, front, (math.sin(ang), math.cos(ang), 0), TOL.facing_cone)
    ang = TOL.facing_cone + 0.01
    assert not facing(pose, front, (math.sin(ang), math.cos(ang), 0), TOL.facing_cone)
    with pytest.raises(DegenerateDirection):
        facing(pose, front, (0, 0, 1), TOL.facing_cone)


def test_view_relations_use_camera_frame():
    cam = Pose((0, -3, 1.5), 0.0)
    assert relative_halfspace((-1, 0, 0), (0, 0, 0), cam, "left_of")
    assert relative_halfspace((1, 0, 0), (0, 0, 0), cam, "right_of")
    assert relative_halfspace((0, -1, 0), (0, 0, 0), cam, "in_front_of")
    assert relative_halfspace((0, 1, 0), (0, 0, 0), cam, "behind")
    # Turning the camera around swaps left and right.
    back = Pose((0, 3, 1.5), math.pi)
    assert relative_halfspace((1, 0, 0), (0, 0, 0), back, "left_of")
    assert not relative_halfspace((0.005, 0, 0), (0, 0, 0), cam, "right_of")


def test_segment_and_point_tests():
    b = box(0, 0, 0.5, 0.5, 0.5, 0.5, 0.3)
    assert segment_hits_box((-2, 0, 0.5), (2, 0, 0.5), b)
    assert not segment_hits_box((-2, 2, 0.5), (2, 2, 0.5), b)
    assert point_in_box((0, 0, 0.5), b)
    assert not point_in_box((0, 0, 1.2), b)


def test_tolerances_reject_nonsense():
    with pytest.raises(ValueError):
        Tolerances(collision_eps=-1)
    with pytest.raises(ValueError):
        Tolerances(support_ratio=0)
