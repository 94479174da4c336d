from dataclasses import replace

import pytest
from hypothesis import given, settings, strategies as st

from sceneedit.geometry import Tolerances
from sceneedit.metrics import EmptyBatch, eligible_objects, floating_objects, grounded_objects, oob_objects, scene_metrics
from cases import box, clean_scene, floater_scene, hand_count_batch, oob_scene, room, stacked_scene, wall_scene


def test_clean():
    r = scene_metrics([clean_scene()])
    assert (r.oob_scene_ratio, r.floating_object_rate) == (0.0, 0.0)


def test_floater_20cm():
    assert floating_objects(floater_scene()) == ["vase_1"]
    # Within the 10cm floor tolerance it counts as grounded.
    near = room(box("vase_1", 3, 3, 0.18, 0.1, 0.1, 0.1))
    assert floating_objects(near) == []


def test_oob_thresholds():
    assert oob_objects(oob_scene(0.2)) == ["chair_1"]
    assert oob_objects(oob_scene(0.05)) == []
    assert oob_objects(clean_scene()) == []


def test_staged_objects_ignored():
    staged = room(box("table_1", 1, 1, 0.4), box("lamp_1", -3, -3, 0.4, support_parent=None))
    assert oob_objects(staged) == []
    assert "lamp_1" not in eligible_objects(staged)


def test_stacked_support():
    s = stacked_scene()
    assert grounded_objects(s) == {"table_1", "stand_1", "vase_1"}
    assert floating_objects(s) == []
    # Lifting the table breaks the whole chain.
    lifted = s.with_object(replace(s.objects["table_1"], pose=replace(s.objects["table_1"].pose, position=(1, 1, 0.8))))
    lifted = lifted.with_object(replace(lifted.objects["stand_1"], pose=replace(lifted.objects["stand_1"].pose, position=(1, 1, 1.4))))
    lifted = lifted.with_object(replace(lifted.objects["vase_1"], pose=replace(lifted.objects["vase_1"].pose, position=(1, 1, 1.7))))
    assert floating_objects(lifted) == ["stand_1", "table_1", "vase_1"]


def test_wall_mount_excluded():
    s = wall_scene()
    assert "clock_1" not in eligible_objects(s)
    assert floating_objects(s) == []
    r = scene_metrics([s])
    assert r.eligible_objects == 1


def test_hand_count_batch():
    r = scene_metrics(hand_count_batch(), names=["a", "b"])
    assert r.eligible_objects == 10
    assert (r.oob_scene_ratio, r.floating_object_rate) == (50.00, 10.00)
    assert [p["name"] for p in r.per_scene] == ["a", "b"]
    assert "50.00%" in r.table() and "10.00%" in r.table()


def test_rounding():
    scenes = [clean_scene(), clean_scene(), oob_scene()]
    assert scene_metrics(scenes).oob_scene_ratio == 33.33


def test_empty_batch():
    with pytest.raises(EmptyBatch):
        scene_metrics([])


@settings(max_examples=60, deadline=None)
@given(st.floats(0.0, 0.5), st.floats(0.0, 0.5), st.floats(0.0, 0.4))
def test_monotone_in_tolerances(t1, t2, offset):
    lo, hi = sorted((t1, t2))
    s = room(
        box("vase_1", 3, 3, 0.1 + offset, 0.1, 0.1, 0.1),
        box("chair_1", 4 + offset, 2, 0.4),
        box("table_1", 1, 1, 0.4),
    )
    f_lo = set(floating_objects(s, Tolerances(floor_contact=lo)))
    f_hi = set(floating_objects(s, Tolerances(floor_contact=hi)))
    assert f_hi <= f_lo
    o_lo = set(oob_objects(s, Tolerances(oob_expand=lo)))
    o_hi = set(oob_objects(s, Tolerances(oob_expand=hi)))
    assert o_hi <= o_lo


def test_grounded_order_independent():
    s = stacked_scene()
    flipped = room(*reversed([s.objects[o] for o in s.ids()]))
    assert grounded_objects(s) == grounded_objects(flipped)
