"""Deterministic geometric runtime for EditLang actions."""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field, replace
from typing import Callable, Iterable, Optional

from . import geometry as geo
from .geometry import Tolerances
from .lang import Call, PlanDocument, Text
from .scene import FLOOR, OrientedBox, Pose, Scene, SceneObject, Vec3, world_obb

GRID_PITCH = 0.10


class ExecutionError(Exception):
    """Raised when an action cannot be realized on the scene (unknown ids, no feasible placement)."""


class ExecutionRejected(Exception):
    def __init__(self, step: int, verdict, scene: Scene, states: list):
        super().__init__(f"step {step + 1} rejected: {verdict.message}")
        self.step = step
        self.verdict = verdict
        self.scene = scene
        self.states = states


def category_from_id(oid: str) -> str:
    m = re.fullmatch(r"(.+?)_\d+", oid)
    return m.group(1) if m else oid


def descendants(scene: Scene, parent: str) -> list:
    """Group members of ``parent``, transitively."""
    out, frontier = [], [parent]
    while frontier:
        nxt = []
        for p in frontier:
            for c in scene.children_of(p):
                if c not in out:
                    out.append(c)
                    nxt.append(c)
        frontier = nxt
    return sorted(out)


def _round_vec(v, places: int = 4) -> Vec3:
    return Vec3(*(round(float(c), places) + 0.0 for c in v))


def _inside_xy(box: OrientedBox, scene: Scene, eps: float) -> bool:
    b = scene.bounds
    return all(b.min.x - eps <= x <= b.max.x + eps and b.min.y - eps <= y <= b.max.y + eps for x, y in geo.footprint(box))


def _axis_values(center: float, radius: float) -> list:
    n = int(math.floor(radius / GRID_PITCH + 1e-9))
    return [round(center + k * GRID_PITCH, 4) for k in range(-n, n + 1)]


def placement_cells(scene: Scene, half: Vec3, yaw: float, surface: str) -> list:
    """Candidate centers on the 10cm grid: floor grid aligned to the room corner, surface grids to the surface center."""
    b = scene.bounds
    probe = OrientedBox(Vec3(0.0, 0.0, 0.0), half, yaw)
    rx = max(abs(x) for x, _ in geo.footprint(probe))
    ry = max(abs(y) for _, y in geo.footprint(probe))
    if surface == FLOOR:
        z = b.floor_height + half.z
        nx = int(math.floor((b.max.x - b.min.x) / GRID_PITCH + 1e-9))
        ny = int(math.floor((b.max.y - b.min.y) / GRID_PITCH + 1e-9))
        xs = [round(b.min.x + k * GRID_PITCH, 4) for k in range(nx + 1)]
        ys = [round(b.min.y + k * GRID_PITCH, 4) for k in range(ny + 1)]
        xs = [x for x in xs if b.min.x + rx - 1e-9 <= x <= b.max.x - rx + 1e-9]
        ys = [y for y in ys if b.min.y + ry - 1e-9 <= y <= b.max.y - ry + 1e-9]
    else:
        s = world_obb(scene.objects[surface])
        z = geo.top_z(s) + half.z
        reach = math.hypot(s.half_extents.x, s.half_extents.y) + max(rx, ry)
        xs = _axis_values(s.center.x, reach)
        ys = _axis_values(s.center.y, reach)
    if z + half.z > b.max.z + 1e-9:
        return []
    z = round(z, 4)
    return [Vec3(x, y, z) for x in xs for y in ys]


def find_placement(
    scene: Scene,
    half: Vec3,
    yaw: float,
    surfaces: Iterable[str],
    anchor,
    obstacles: list,
    tol: Tolerances,
    accept: Optional[Callable[[OrientedBox], bool]] = None,
) -> Optional[tuple]:
    """Nearest feasible grid cell to ``anchor``; returns (center, surface) or None."""
    cells = []
    for surf in surfaces:
        for c in placement_cells(scene, half, yaw, surf):
            d = math.dist(c, anchor)
            cells.append((round(d, 9), c.x, c.y, c.z, surf, c))
    cells.sort(key=lambda t: t[:5])
    eps = tol.collision_eps
    surface_boxes = {s: world_obb(scene.objects[s]) for s in set(surfaces) if s != FLOOR}
    for *_, surf, c in cells:
        box = OrientedBox(c, half, yaw)
        if not _inside_xy(box, scene, eps):
            continue
        if surf != FLOOR and geo.support_ratio(box, surface_boxes[surf], eps) < tol.support_ratio:
            continue
        if any(geo.obb_penetration(box, ob) > eps for ob in obstacles):
            continue
        if accept is not None and not accept(box):
            continue
        return c, surf
    return None


def placement_obstacles(scene: Scene, exclude: Iterable[str] = ()) -> list:
    exclude = set(exclude)
    return [world_obb(scene.objects[o]) for o in scene.placed_ids() if o not in exclude]


def candidate_surfaces(scene: Scene, subject: str) -> list:
    """Floor plus every placed, non-wall-mounted object that is not the subject or one of its group members."""
    skip = {subject, *descendants(scene, subject)}
    return [FLOOR] + [o for o in scene.placed_ids() if o not in skip and not scene.objects[o].wall_mounted]


@dataclass
class Realizer:
    """Resolves symbolic arguments (surfaces, targets) to concrete poses and applies actions to a scene.

    ``obstacles`` overrides the occupancy used by placement search; by default every placed object other
    than the moved ones blocks.
    """

    tol: Tolerances = field(default_factory=Tolerances)
    obstacles: Optional[list] = None
    accept: Optional[Callable[[OrientedBox], bool]] = None

    def _obstacles(self, scene: Scene, moving: Iterable[str]) -> list:
        if self.obstacles is not None:
            return self.obstacles
        return placement_obstacles(scene, moving)

    def resolve(self, scene: Scene, call: Call) -> Call:
        """Return an equivalent call whose continuous parameters are concrete."""
        name, args = call.name, call.args
        if name == "move_to" and isinstance(args[1], str):
            oid, surf = args
            obj = _need(scene, oid)
            hit = find_placement(
                scene, obj.half_extents, obj.pose.yaw, [_surface(scene, surf)], obj.position,
                self._obstacles(scene, [oid]), self.tol, self.accept,
            )
            if hit is None:
                raise ExecutionError(f"no collision-free supported placement for {oid} on {surf}")
            return Call("move_to", (oid, hit[0]))
        if name == "place_on" and len(args) == 2:
            oid, surf = args
            obj = _need(scene, oid)
            _surface(scene, surf)
            anchor = obj.position if surf == FLOOR else world_obb(scene.objects[surf]).center
            hit = find_placement(
                scene, obj.half_extents, obj.pose.yaw, [surf], anchor,
                self._obstacles(scene, [oid]), self.tol, self.accept,
            )
            if hit is None:
                raise ExecutionError(f"no collision-free supported placement for {oid} on {surf}")
            return Call("place_on", (oid, surf, hit[0]))
        if name == "add_object" and len(args) == 3:
            oid, cat, surf = args
            entry = scene.catalog_entry(cat)
            if entry is None:
                raise ExecutionError(f"catalog has no entry for category {cat}")
            _surface(scene, surf)
            if surf == FLOOR:
                b = scene.bounds
                anchor = Vec3((b.min.x + b.max.x) / 2, (b.min.y + b.max.y) / 2, b.floor_height)
            else:
                anchor = world_obb(scene.objects[surf]).center
            hit = find_placement(
                scene, entry.default_half_extents, 0.0, [surf], anchor,
                self._obstacles(scene, [oid]), self.tol, self.accept,
            )
            if hit is None:
                raise ExecutionError(f"no collision-free supported placement for new {cat} on {surf}")
            return Call("add_object", (oid, cat, surf, hit[0]))
        if name == "place_relative" and len(args) == 4:
            oid, ref, rel, view = args
            obj = _need(scene, oid)
            refobj = _need(scene, ref)
            if view not in scene.viewpoints:
                raise ExecutionError(f"unknown viewpoint {view}")
            vp = scene.viewpoints[view]
            surf = refobj.support_parent if refobj.support_parent in scene.objects else FLOOR
            base_accept = self.accept
            tol = self.tol

            def accept(box, _c=refobj.position):
                if not geo.relative_halfspace(box.center, _c, vp, rel):
                    return False
                if geo.distance_xy(box, world_obb(refobj)) > tol.near_default:
                    return False
                return base_accept is None or base_accept(box)

            hit = find_placement(
                scene, obj.half_extents, obj.pose.yaw, [surf], refobj.position,
                self._obstacles(scene, [oid]), self.tol, accept,
            )
            if hit is None:
                raise ExecutionError(f"no placement for {oid} {rel.replace('_', ' ')} {ref} from {view}")
            return Call("place_relative", (oid, ref, rel, view, hit[0]))
        return call

    def apply(self, scene: Scene, call: Call) -> Scene:
        call = self.resolve(scene, call)
        return apply_resolved(scene, call)


def _need(scene: Scene, oid: str) -> SceneObject:
    if oid not in scene.objects:
        raise ExecutionError(f"unknown object {oid}")
    return scene.objects[oid]


def _surface(scene: Scene, surf: str) -> str:
    if surf != FLOOR:
        _need(scene, surf)
    return surf


def _moved(obj: SceneObject, center, support: Optional[str]) -> SceneObject:
    return replace(obj, pose=Pose(_round_vec(center), obj.pose.yaw), support_parent=support)


def _support_after(scene: Scene, oid: str, tol: Tolerances) -> Optional[str]:
    from .predicates import SceneGeometry

    g = SceneGeometry(scene, tol)
    if oid not in g.support_table:
        return None
    return g.support_of(oid)


def apply_resolved(scene: Scene, call: Call, tol: Optional[Tolerances] = None) -> Scene:
    """Apply a call whose continuous parameters are concrete. Only the named objects change."""
    tol = tol or Tolerances()
    name, args = call.name, call.args
    if name == "move_to":
        oid, pos = args
        if isinstance(pos, str):
            raise ExecutionError("move_to target must be resolved to a position first")
        obj = _need(scene, oid)
        out = scene.with_object(_moved(obj, pos, None))
        return out.with_object(replace(out.objects[oid], support_parent=_support_after(out, oid, tol)))
    if name == "place_on":
        oid, surf, pos = args
        obj = _need(scene, oid)
        _surface(scene, surf)
        if surf == FLOOR:
            z = scene.bounds.floor_height + obj.half_extents.z
        else:
            z = geo.top_z(world_obb(scene.objects[surf])) + obj.half_extents.z
        return scene.with_object(_moved(obj, (pos[0], pos[1], z), surf))
    if name == "place_relative":
        oid, _ref, _rel, _view, pos = args
        obj = _need(scene, oid)
        out = scene.with_object(_moved(obj, pos, None))
        return out.with_object(replace(out.objects[oid], support_parent=_support_after(out, oid, tol)))
    if name == "move_group":
        oid, pos = args
        obj = _need(scene, oid)
        delta = Vec3(*pos) - obj.position
        out = scene
        for mid in [oid, *descendants(scene, oid)]:
            m = scene.objects[mid]
            out = out.with_object(replace(m, pose=Pose(_round_vec(m.position + delta), m.pose.yaw)))
        for mid in [oid, *descendants(scene, oid)]:
            out = out.with_object(replace(out.objects[mid], support_parent=_support_after(out, mid, tol)))
        return out
    if name == "align_with":
        oid, ref, axis = args
        obj, refobj = _need(scene, oid), _need(scene, ref)
        k = "xyz".index(axis)
        pos = list(obj.position)
        pos[k] = refobj.position[k]
        out = scene.with_object(_moved(obj, pos, obj.support_parent))
        return out.with_object(replace(out.objects[oid], support_parent=_support_after(out, oid, tol)))
    if name == "rotate_towards":
        oid, target = args
        obj, t = _need(scene, oid), _need(scene, target)
        yaw = geo.yaw_towards(obj.pose, obj.front_axis, t.position)
        return scene.with_object(replace(obj, pose=Pose(obj.position, yaw)))
    if name == "rotate_by":
        oid, degrees = args
        obj = _need(scene, oid)
        turns = degrees / 360.0
        if turns == round(turns):
            return scene
        return scene.with_object(replace(obj, pose=Pose(obj.position, obj.pose.yaw + math.radians(degrees))))
    if name == "scale":
        oid, sx, sy, sz = args
        obj = _need(scene, oid)
        if min(sx, sy, sz) <= 0:
            raise ExecutionError("scale factors must be positive")
        base = obj.base_half_extents
        half = Vec3(base.x * sx, base.y * sy, base.z * sz)
        z = obj.z_min + half.z
        return scene.with_object(
            replace(obj, half_extents=half, pose=Pose(Vec3(obj.position.x, obj.position.y, z), obj.pose.yaw))
        )
    if name == "add_object":
        oid, cat, surf, pos = args
        if oid in scene.objects:
            raise ExecutionError(f"object {oid} already exists")
        entry = scene.catalog_entry(cat)
        if entry is None:
            raise ExecutionError(f"catalog has no entry for category {cat}")
        _surface(scene, surf)
        half = entry.default_half_extents
        if surf == FLOOR:
            z = scene.bounds.floor_height + half.z
        else:
            z = geo.top_z(world_obb(scene.objects[surf])) + half.z
        obj = SceneObject(
            id=oid, category=cat, pose=Pose(_round_vec((pos[0], pos[1], z)), 0.0), half_extents=half,
            style=entry.style, support_parent=surf, base_half_extents=half,
        )
        removed = tuple(r for r in scene.removed if r != oid)
        return replace(scene.with_object(obj), removed=removed)
    if name == "remove_object":
        (oid,) = args
        _need(scene, oid)
        return scene.without_object(oid)
    if name == "stylize":
        oid, text = args
        obj = _need(scene, oid)
        return scene.with_object(replace(obj, style=text.value if isinstance(text, Text) else str(text)))
    raise ExecutionError(f"unsupported action {name}")


def touched_ids(scene: Scene, call: Call) -> list:
    """Objects whose geometry or attributes the call changes."""
    subject = call.args[0]
    if call.name == "move_group" and subject in scene.objects:
        return [subject, *descendants(scene, subject)]
    return [subject]


def execute_step(scene: Scene, call: Call, tol: Optional[Tolerances] = None, rules=None) -> tuple:
    """Resolve, apply and check one step. Returns (scene, resolved call); raises on a failed check."""
    from .validator import physical_verdict

    tol = tol or Tolerances()
    try:
        resolved = Realizer(tol).resolve(scene, call)
        out = apply_resolved(scene, resolved, tol)
    except ExecutionError as exc:
        from .validator import Verdict

        raise ExecutionRejected(0, Verdict.reject("FormalValidity", str(exc)), scene, []) from None
    verdict = physical_verdict(scene, out, touched_ids(scene, resolved), tol, rules)
    if not verdict.accepted:
        raise ExecutionRejected(0, verdict, scene, [])
    return out, resolved


def execute_plan(scene: Scene, plan, tol: Optional[Tolerances] = None, rules=None, taus=()) -> tuple:
    """Fold execute_step over the plan. Returns (final scene, states after each step, resolved steps)."""
    from .predicates import evaluate_state

    tol = tol or Tolerances()
    steps = plan.steps if isinstance(plan, PlanDocument) else tuple(plan)
    states = [evaluate_state(scene, tol, taus)]
    resolved = []
    for i, call in enumerate(steps):
        try:
            scene, r = execute_step(scene, call, tol, rules)
        except ExecutionRejected as exc:
            raise ExecutionRejected(i, exc.verdict, scene, states) from None
        resolved.append(r)
        states.append(evaluate_state(scene, tol, taus))
    return scene, states, resolved
