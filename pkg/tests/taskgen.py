"""Random scenes and forward-valid edit tasks for property tests."""

from __future__ import annotations

import math
import random
from dataclasses import dataclass

from sceneedit.domain import PreconditionUnsatisfied, apply, instantiate
from sceneedit.executor import descendants
from sceneedit.geometry import Tolerances, obb_penetration
from sceneedit.lang import Call, Text
from sceneedit.predicates import SceneGeometry, evaluate_state
from sceneedit.scene import FLOOR, CatalogEntry, OrientedBox, Pose, RoomBounds, Scene, SceneObject, Vec3, world_obb
from sceneedit.validator import check_invariants, physical_verdict

FURNITURE = ("table", "cabinet", "crate", "bench", "desk", "dresser")
SMALL = ("vase", "book", "mug", "bowl", "plant", "clock")
STYLES = ("oak", "walnut", "white", "black", "brass", "")

# Which predicates of an action's added atoms count as goals; the rest are side effects.
GOAL_PREDICATES = {
    "move_to": {"at", "on", "supported", "stable", "clear", "contact"},
    "place_on": {"at", "on", "supported", "stable", "clear", "contact"},
    "add_object": {"exists", "at", "on", "supported", "stable", "contact"},
    "remove_object": {"removed", "clear"},
    "rotate_by": {"is_facing"},
    "rotate_towards": {"is_facing"},
    "stylize": {"has_style"},
    "scale": {"has_scale"},
}


@dataclass
class Task:
    scene: Scene
    actions: list
    goals: frozenset
    final: Scene


def _c(rng, lo, hi):
    return round(rng.uniform(lo, hi), 2)


def _free(scene, box, ignore=(), margin=0.05):
    """True if ``box`` keeps ``margin`` clearance from every placed object not in ``ignore``."""
    grown = OrientedBox(box.center, Vec3(box.half_extents.x + margin, box.half_extents.y + margin, box.half_extents.z), box.yaw)
    for o in scene.placed_ids():
        if o in ignore:
            continue
        if obb_penetration(grown, world_obb(scene.objects[o])) > 0.0:
            return False
    return True


def _inside(scene, box, margin=0.05):
    b = scene.bounds
    r = math.hypot(box.half_extents.x, box.half_extents.y)
    c = box.center
    return b.min.x + r + margin <= c.x <= b.max.x - r - margin and b.min.y + r + margin <= c.y <= b.max.y - r - margin


def random_scene(rng: random.Random, n_min: int = 5, n_max: int = 12) -> Scene:
    sx, sy = _c(rng, 4.0, 7.0), _c(rng, 4.0, 7.0)
    scene = Scene(RoomBounds((0, 0, 0), (sx, sy, 2.8)))
    n = rng.randint(n_min, n_max)
    counts: dict = {}

    def new_id(cat):
        counts[cat] = counts.get(cat, 0) + 1
        return f"{cat}_{counts[cat]}"

    n_big = max(2, min(n - 1, rng.randint(n // 3 + 1, n // 2 + 2)))
    tries = 0
    while len(scene.objects) < n_big and tries < 400:
        tries += 1
        cat = rng.choice(FURNITURE)
        half = Vec3(_c(rng, 0.15, 0.5), _c(rng, 0.15, 0.5), _c(rng, 0.2, 0.5))
        yaw = rng.choice((0.0, math.pi / 2, math.pi / 4, rng.uniform(0, 2 * math.pi)))
        pos = Vec3(_c(rng, 0, sx), _c(rng, 0, sy), half.z)
        box = OrientedBox(pos, half, yaw)
        if not _inside(scene, box) or not _free(scene, box):
            continue
        oid = new_id(cat)
        obj = SceneObject(oid, cat, Pose(pos, yaw), half, style=rng.choice(STYLES), support_parent=FLOOR)
        scene = scene.with_object(obj)
    bigs = scene.ids()
    tries = 0
    while len(scene.objects) < n and tries < 400:
        tries += 1
        cat = rng.choice(SMALL)
        half = Vec3(_c(rng, 0.04, 0.12), _c(rng, 0.04, 0.12), _c(rng, 0.04, 0.15))
        yaw = rng.choice((0.0, rng.uniform(0, 2 * math.pi)))
        if rng.random() < 0.7:
            sup = scene.objects[rng.choice(bigs)]
            # Sample inside the inscribed circle of the top so the footprint is fully supported.
            room = min(sup.half_extents.x, sup.half_extents.y) - math.hypot(half.x, half.y)
            if room <= 0:
                continue
            ang, rad = rng.uniform(0, 2 * math.pi), rng.uniform(0, room)
            pos = Vec3(
                round(sup.position.x + rad * math.cos(ang), 2),
                round(sup.position.y + rad * math.sin(ang), 2),
                round(sup.z_max + half.z, 4),
            )
            parent = sup.id
        else:
            pos = Vec3(_c(rng, 0, sx), _c(rng, 0, sy), half.z)
            parent = FLOOR
        box = OrientedBox(pos, half, yaw)
        if not _inside(scene, box) or not _free(scene, box, margin=0.03):
            continue
        obj = SceneObject(new_id(cat), cat, Pose(pos, yaw), half, style=rng.choice(STYLES), support_parent=parent)
        trial = scene.with_object(obj)
        if check_invariants(trial, only=[obj.id]):
            continue
        scene = trial
    catalog = [
        CatalogEntry("lamp", Vec3(0.15, 0.15, 0.25), "brass"),
        CatalogEntry("vase", Vec3(0.06, 0.06, 0.12), "white"),
    ]
    return Scene(scene.bounds, scene.objects, catalog, {"cam": Pose((sx / 2, -1.0, 1.5), 0.0)})


def _clear_surfaces(scene, tol, used=()):
    """Unoccupied surfaces that no earlier action touched."""
    g = SceneGeometry(scene, tol)
    busy = set(g.on_map.values())
    return [o for o in scene.placed_ids() if o not in busy and o not in used and not scene.objects[o].wall_mounted]


def _surface_spot(rng, scene, half, surf):
    if surf == FLOOR:
        b = scene.bounds
        return Vec3(_c(rng, b.min.x, b.max.x), _c(rng, b.min.y, b.max.y), round(b.floor_height + half.z, 4))
    s = scene.objects[surf]
    room = min(s.half_extents.x, s.half_extents.y) - math.hypot(half.x, half.y) - 0.01
    if room <= 0:
        return None
    ang, rad = rng.uniform(0, 2 * math.pi), rng.uniform(0, room)
    return Vec3(
        round(s.position.x + rad * math.cos(ang), 2),
        round(s.position.y + rad * math.sin(ang), 2),
        round(s.z_max + half.z, 4),
    )


def _propose(rng, scene, tol, frozen, used):
    """One random action on a fresh subject, or None."""
    g = SceneGeometry(scene, tol)
    supports = set(g.on_map.values())
    subjects = [o for o in scene.placed_ids() if o not in used and o not in frozen]
    clear_subjects = [o for o in subjects if o not in supports]
    kind = rng.choice(("move", "move", "place_on", "rotate", "stylize", "scale", "remove", "add", "face"))
    if kind == "add":
        cat = rng.choice([e.category for e in scene.catalog])
        k = 1
        while f"{cat}_{k}" in scene.objects or f"{cat}_{k}" in scene.removed:
            k += 1
        oid = f"{cat}_{k}"
        half = scene.catalog_entry(cat).default_half_extents
        surf = rng.choice([FLOOR, *_clear_surfaces(scene, tol, used)])
        pos = _surface_spot(rng, scene, half, surf)
        return None if pos is None else Call("add_object", (oid, cat, surf, pos))
    if not clear_subjects:
        return None
    o = rng.choice(clear_subjects)
    obj = scene.objects[o]
    if kind == "move":
        pos = _surface_spot(rng, scene, obj.half_extents, FLOOR)
        return Call("move_to", (o, pos))
    if kind == "place_on":
        options = [s for s in _clear_surfaces(scene, tol, used) if s != o and s not in descendants(scene, o)]
        if not options:
            return None
        surf = rng.choice(options)
        pos = _surface_spot(rng, scene, obj.half_extents, surf)
        return None if pos is None else Call("place_on", (o, surf, pos))
    if kind == "rotate":
        # Only rotate objects with room to spin, so any heading in the facing cone stays collision-free.
        r = math.hypot(obj.half_extents.x, obj.half_extents.y)
        disc = OrientedBox(obj.position, Vec3(r, r, obj.half_extents.z), 0.0)
        if not _free(scene, disc, ignore=[o], margin=0.02) or not _inside(scene, disc, margin=0.02):
            return None
        return Call("rotate_by", (o, float(rng.choice((15, 30, 45, 90, 120, 180, -30, -60, -90, -135)))))
    if kind == "face":
        r = math.hypot(obj.half_extents.x, obj.half_extents.y)
        disc = OrientedBox(obj.position, Vec3(r, r, obj.half_extents.z), 0.0)
        others = [x for x in scene.placed_ids() if x != o and x not in used]
        if not others or not _free(scene, disc, ignore=[o], margin=0.02) or not _inside(scene, disc, margin=0.02):
            return None
        return Call("rotate_towards", (o, rng.choice(others)))
    if kind == "stylize":
        return Call("stylize", (o, Text(rng.choice(("red", "blue", "matte green", "oak")))))
    if kind == "scale":
        s = rng.choice((0.8, 0.9, 1.1, 1.2))
        return Call("scale", (o, s, s, s))
    if kind == "remove":
        return Call("remove_object", (o,))
    return None


def random_task(rng: random.Random, tol: Tolerances = None, n_actions=None, max_tries: int = 200) -> Task:
    tol = tol or Tolerances()
    scene = random_scene(rng)
    s0 = evaluate_state(scene, tol)
    want = n_actions or rng.randint(1, 4)
    cur, state = scene, s0
    actions, used, frozen = [], set(), set()
    added = set()
    tries = 0
    while len(actions) < want and tries < max_tries:
        tries += 1
        call = _propose(rng, cur, tol, frozen, used)
        if call is None:
            continue
        try:
            inst, preview = instantiate(call, cur, tol)
            nxt = apply(state, inst)
        except (PreconditionUnsatisfied, Exception):
            continue
        if not physical_verdict(cur, preview, inst.touched, tol).accepted:
            continue
        # Out-of-bounds placements rejected above; also keep every object clear of others.
        if any(v.kind == "collision" for v in check_invariants(preview, tol)):
            continue
        subject = call.args[0]
        used.add(subject)
        if call.name in ("place_on", "add_object"):
            frozen.add(call.args[2])
        # Supports of the subject must not change later either.
        sup = SceneGeometry(cur, tol).on_map.get(subject)
        if sup:
            frozen.add(sup)
        keep = GOAL_PREDICATES[call.name]
        kept = {a for a in inst.add if a.predicate in keep}
        # Other objects named by a goal stay put so the goal keeps its meaning.
        for a in kept:
            frozen |= a.objects() - {subject, FLOOR}
        added |= kept
        actions.append(inst.call)
        cur, state = preview, nxt
    final_state = evaluate_state(cur, tol)
    # Relational goals only refer to objects that no action touched.
    goals = frozenset(a for a in (final_state - s0) & added if not (a.objects() - {a.subject, FLOOR}) & used)
    return Task(scene, actions, goals, cur)
