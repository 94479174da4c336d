"""Ordered acceptance checks for proposed actions and the scene invariant suite."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from typing import Iterable, Optional

from . import geometry as geo
from .geometry import Tolerances
from .lang import ACTIONS, GroundAtom, match_signature
from .scene import OrientedBox, Scene, Vec3, world_obb

CHECKS = ("FormalValidity", "GoalDirectedness", "Monotonicity", "PhysicalInvariant", "ContextualConsistency")


@dataclass(frozen=True)
class Verdict:
    accepted: bool
    failed_check: Optional[str] = None
    message: str = ""
    details: tuple = ()

    def __post_init__(self):
        if self.accepted and self.failed_check is not None:
            raise ValueError("an accepted verdict cannot name a failed check")
        if not self.accepted and not self.message:
            raise ValueError("a rejection needs a message")

    @classmethod
    def ok(cls) -> "Verdict":
        return cls(True)

    @classmethod
    def reject(cls, check: str, message: str, details: Iterable = ()) -> "Verdict":
        if check not in CHECKS:
            raise ValueError(f"unknown check {check}")
        return cls(False, check, message, tuple(str(d) for d in details))

    def to_dict(self) -> dict:
        return {k: (list(v) if isinstance(v, tuple) else v) for k, v in asdict(self).items()}


@dataclass(frozen=True)
class Violation:
    kind: str  # collision, floating, multiple_support, out_of_bounds
    objects: tuple
    depth: float = 0.0

    def message(self) -> str:
        if self.kind == "collision":
            return (
                f"Target position causes collision with {self.objects[1]}. "
                "Please select a clear region or move the obstacle first."
            )
        o = self.objects[0]
        if self.kind == "floating":
            return f"{o} would be left without support. Place it on the floor or on a clear surface."
        if self.kind == "multiple_support":
            return f"{o} would rest on several surfaces ({', '.join(self.objects[1:])}). Choose a single support."
        return f"{o} would extend outside the room. Choose a position inside the room bounds."

    def to_dict(self) -> dict:
        return {"kind": self.kind, "objects": list(self.objects), "depth": round(self.depth, 6)}


@dataclass(frozen=True)
class RuleSet:
    """Contextual rule table; each rule can be switched off on its own."""

    door_clearance: bool = True
    seating_orientation: bool = True
    door_clearance_depth: float = 0.6

    def to_dict(self) -> dict:
        return asdict(self)


def _involved(scene: Scene, ids, ignore) -> list:
    placed = set(scene.placed_ids())
    return sorted(o for o in ids if o in placed and o not in ignore)


def check_invariants(
    scene: Scene,
    tol: Optional[Tolerances] = None,
    only: Optional[Iterable[str]] = None,
    ignore: Iterable[str] = (),
) -> list:
    """One violation per breach. ``only`` limits the check to those objects (pairs need one member in it)."""
    from .predicates import SceneGeometry

    tol = tol or Tolerances()
    ignore = set(ignore)
    g = SceneGeometry(scene, tol)
    placed = [o for o in g.placed if o not in ignore]
    subjects = placed if only is None else _involved(scene, only, ignore)
    eps = tol.collision_eps
    out = []
    seen = set()
    for a in subjects:
        for b in placed:
            if a == b or (b, a) in seen:
                continue
            seen.add((a, b))
            depth = geo.obb_penetration(g.boxes[a], g.boxes[b])
            if depth > eps:
                out.append(Violation("collision", (a, b), depth))
    b = scene.bounds
    for o in subjects:
        obj = scene.objects[o]
        box = g.boxes[o]
        inside = all(
            b.min.x - eps <= x <= b.max.x + eps and b.min.y - eps <= y <= b.max.y + eps for x, y in geo.footprint(box)
        )
        if not inside or geo.top_z(box) > b.max.z + eps or geo.bottom_z(box) < b.floor_height - eps:
            out.append(Violation("out_of_bounds", (o,)))
        if obj.wall_mounted:
            continue
        sup = [s for s, _ in g.support_table.get(o, []) if s not in ignore]
        if len(sup) >= 2:
            out.append(Violation("multiple_support", (o, *sup)))
        elif not sup and not g.floor_contact(o):
            out.append(Violation("floating", (o,)))
    return out


def _door_zone(obj, depth: float) -> OrientedBox:
    box = world_obb(obj)
    fx, fy = geo.world_front(obj.pose, obj.front_axis)
    n = (fx * fx + fy * fy) ** 0.5 or 1.0
    fx, fy = fx / n, fy / n
    # Depth of the box along its front direction.
    reach = geo._radius_on(box, (fx, fy))
    c = box.center
    center = Vec3(c.x + fx * (reach + depth / 2), c.y + fy * (reach + depth / 2), c.z)
    across = box.half_extents.x if abs(obj.front_axis.y) >= abs(obj.front_axis.x) else box.half_extents.y
    yaw = math.atan2(fy, fx) - math.pi / 2
    return OrientedBox(center, Vec3(across, depth / 2, box.half_extents.z), yaw)


def is_door(category: str) -> bool:
    return "door" in category.lower()


def door_zones(scene: Scene, rules: RuleSet) -> dict:
    if not rules.door_clearance:
        return {}
    return {
        o: _door_zone(scene.objects[o], rules.door_clearance_depth)
        for o in scene.placed_ids()
        if is_door(scene.objects[o].category)
    }


def check_context(scene: Scene, touched: Iterable[str], tol: Tolerances, rules: Optional[RuleSet]) -> list:
    """Messages for contextual rules broken by the touched objects."""
    rules = rules or RuleSet()
    touched = _involved(scene, touched, ())
    out = []
    zones = door_zones(scene, rules)
    for o in touched:
        box = world_obb(scene.objects[o])
        for door, zone in sorted(zones.items()):
            if door == o:
                continue
            if geo.obb_penetration(box, zone) > tol.collision_eps:
                out.append(
                    (
                        f"{o} blocks the clearance in front of {door}. "
                        f"Keep {rules.door_clearance_depth:g}m in front of doors free.",
                        (o, door),
                    )
                )
        if o in zones:
            for other in scene.placed_ids():
                if other != o and geo.obb_penetration(world_obb(scene.objects[other]), zones[o]) > tol.collision_eps:
                    out.append(
                        (f"{other} would block the clearance in front of {o}. Choose a position with a free doorway.", (other, o))
                    )
    if rules.seating_orientation:
        for o in touched:
            obj = scene.objects[o]
            parent = obj.group_parent
            if "chair" not in obj.category.lower() or parent is None or parent not in scene.objects:
                continue
            if "table" not in scene.objects[parent].category.lower():
                continue
            target = scene.objects[parent].position
            try:
                ok = geo.facing(obj.pose, obj.front_axis, target, tol.facing_cone)
            except geo.DegenerateDirection:
                ok = True
            if not ok:
                out.append((f"{o} must face {parent}, the table it is grouped with. Rotate it towards {parent}.", (o, parent)))
    return out


def dependents(scene: Scene, ids: Iterable[str], tol: Tolerances) -> list:
    """Objects resting on any of ``ids`` in ``scene``."""
    from .predicates import SceneGeometry

    ids = set(ids)
    g = SceneGeometry(scene, tol)
    return sorted(o for o, s in g.on_map.items() if s in ids and o not in ids)


def physical_verdict(
    before: Scene,
    after: Scene,
    touched: Iterable[str],
    tol: Tolerances,
    rules: Optional[RuleSet] = None,
    ignore: Iterable[str] = (),
) -> Verdict:
    touched = list(touched)
    ignore = set(ignore)
    check = set(touched) | set(dependents(before, touched, tol))
    violations = check_invariants(after, tol, only=check, ignore=ignore)
    if violations:
        violations.sort(key=lambda v: (v.kind != "collision", v.objects))
        v = violations[0]
        if v.kind == "collision" and v.objects[0] not in touched and v.objects[1] in touched:
            v = Violation(v.kind, (v.objects[1], v.objects[0]), v.depth)
        return Verdict.reject("PhysicalInvariant", v.message(), [x.to_dict()["objects"] for x in violations])
    context = check_context(after, [t for t in touched if t not in ignore], tol, rules)
    if context:
        msg, objs = context[0]
        return Verdict.reject("ContextualConsistency", msg, objs)
    return Verdict.ok()


def formal_verdict(action, scene: Scene) -> Optional[Verdict]:
    """Schema, arity and vocabulary checks; None when the action is well-formed."""
    call = action.call
    try:
        match_signature(ACTIONS, call.name, call.args)
    except Exception as exc:  # noqa: BLE001 - any signature failure is a formal rejection
        return Verdict.reject("FormalValidity", f"{call} is malformed: {exc}", [str(call)])
    if action.add & action.delete:
        clash = sorted(str(a) for a in action.add & action.delete)
        return Verdict.reject("FormalValidity", f"{call} both adds and deletes {', '.join(clash)}.", clash)
    for oid in action.referenced:
        if oid not in scene.objects and not (call.name == "add_object" and oid == call.args[0]):
            return Verdict.reject(
                "FormalValidity", f"{call} refers to unknown object {oid}. Use only objects present in the scene.", [oid]
            )
    subject = call.args[0]
    if subject in scene.objects and scene.objects[subject].locked and call.name != "add_object":
        return Verdict.reject("FormalValidity", f"{subject} is locked and cannot be edited.", [subject])
    return None


def validate(
    action,
    goals: Iterable[GroundAtom],
    sat_ledger: Iterable[GroundAtom],
    scene_preview: Scene,
    tol: Optional[Tolerances] = None,
    rules: Optional[RuleSet] = None,
    base: Optional[Scene] = None,
    ignore: Iterable[str] = (),
    extra_previews: Iterable[Scene] = (),
) -> Verdict:
    """Run the checks in fixed order; the first failure wins.

    ``base`` is the scene the action starts from (defaults to the preview), ``ignore`` lists objects the
    physical checks skip, and ``extra_previews`` are further scenes that must also pass the physical checks.
    """
    from .domain import mutex_closure

    tol = tol or Tolerances()
    base = base if base is not None else scene_preview
    goals = frozenset(goals)
    ledger = frozenset(sat_ledger)

    bad = formal_verdict(action, base)
    if bad is not None:
        return bad

    if not action.add & goals:
        if not goals:
            msg = "Action does not satisfy any current goal. Every goal is already satisfied; no action is needed."
        else:
            msg = f"Action does not satisfy any current goal. Focus only on {', '.join(sorted(map(str, goals)))}."
        return Verdict.reject("GoalDirectedness", msg, [str(action.call)])

    deleted = (action.delete | mutex_closure(ledger, action.add)) & ledger
    if deleted:
        names = sorted(str(a) for a in deleted)
        return Verdict.reject(
            "Monotonicity",
            f"Action undoes a previously satisfied goal: {', '.join(names)}. "
            "Do not move objects that are already correctly placed.",
            names,
        )

    for preview in (scene_preview, *extra_previews):
        v = physical_verdict(base, preview, action.touched, tol, rules, ignore)
        if not v.accepted:
            return v
    return Verdict.ok()
