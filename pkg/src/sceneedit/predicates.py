"""Closed-world evaluation of EditLang predicates on a scene."""

from __future__ import annotations

import math
from functools import cached_property
from typing import Iterable, Optional

from . import geometry as geo
from .geometry import Tolerances
from .lang import AXES, GroundAtom, PREDICATES, Text
from .scene import FLOOR, OrientedBox, Scene, Vec3, world_obb

PAIR_CUTOFF = 10.0
BETWEEN_WIDTH = 0.3
ALIGN_TOL = 0.02
ACCESS_DEPTH = 0.5

SymbolicState = frozenset


class MalformedAtom(ValueError):
    pass


def normalize_style(text: str) -> str:
    return " ".join(text.lower().split())


class SceneGeometry:
    """Per-scene cache of boxes and support relations shared by predicates, validator and metrics."""

    def __init__(self, scene: Scene, tol: Tolerances):
        self.scene = scene
        self.tol = tol
        self.placed = scene.placed_ids()
        self.boxes = {oid: world_obb(scene.objects[oid]) for oid in scene.objects}

    def box(self, oid: str) -> OrientedBox:
        return self.boxes[oid]

    @cached_property
    def support_table(self) -> dict:
        """oid -> list of (surface id, ratio) with ratio at or above the support threshold, best first."""
        eps = self.tol.collision_eps
        table = {oid: [] for oid in self.placed}
        for oid in self.placed:
            if self.scene.objects[oid].wall_mounted:
                continue
            b = self.boxes[oid]
            base = geo.bottom_z(b)
            for sid in self.placed:
                if sid == oid:
                    continue
                s = self.boxes[sid]
                if abs(base - geo.top_z(s)) > eps:
                    continue
                r = geo.support_ratio(b, s, eps)
                if r >= self.tol.support_ratio:
                    table[oid].append((sid, r))
            table[oid].sort(key=lambda t: (-t[1], t[0]))
        return table

    def floor_contact(self, oid: str) -> bool:
        return abs(geo.bottom_z(self.boxes[oid]) - self.scene.bounds.floor_height) <= self.tol.floor_contact

    def support_of(self, oid: str) -> Optional[str]:
        """The functional ``on`` target: best supporting surface, else floor, else None."""
        if oid not in self.support_table:
            return None
        sup = self.support_table[oid]
        if sup:
            return sup[0][0]
        if self.floor_contact(oid):
            return FLOOR
        return None

    def is_stable(self, oid: str) -> bool:
        obj = self.scene.objects[oid]
        if obj.wall_mounted:
            return True
        sup = self.support_table.get(oid, [])
        if len(sup) == 1:
            return True
        return not sup and self.floor_contact(oid)

    @cached_property
    def on_map(self) -> dict:
        return {oid: self.support_of(oid) for oid in self.placed}

    def resting_on(self, surface: str) -> list:
        return sorted(o for o, s in self.on_map.items() if s == surface)

    def visible(self, oid: str, view) -> bool:
        target = self.boxes[oid].center
        for other in self.placed:
            if other == oid:
                continue
            if geo.segment_hits_box(view.position, target, self.boxes[other], self.tol.collision_eps):
                return False
        return True

    def accessible(self, oid: str) -> bool:
        b = self.boxes[oid]
        hx, hy, hz = b.half_extents
        half = ACCESS_DEPTH / 2
        c, s = math.cos(b.yaw), math.sin(b.yaw)
        cells = []
        for lx, ly, ex, ey in (
            (hx + half, 0.0, half, hy),
            (-hx - half, 0.0, half, hy),
            (0.0, hy + half, hx, half),
            (0.0, -hy - half, hx, half),
        ):
            center = Vec3(b.center.x + c * lx - s * ly, b.center.y + s * lx + c * ly, b.center.z)
            cells.append(OrientedBox(center, Vec3(ex, ey, hz), b.yaw))
        bounds = self.scene.bounds
        eps = self.tol.collision_eps
        for cell in cells:
            if not all(
                bounds.min.x - eps <= x <= bounds.max.x + eps and bounds.min.y - eps <= y <= bounds.max.y + eps
                for x, y in geo.footprint(cell)
            ):
                continue
            if all(
                geo.obb_penetration(cell, self.boxes[o]) <= eps for o in self.placed if o != oid
            ):
                return True
        return False


def _scale_ratios(obj) -> tuple:
    return tuple(h / b for h, b in zip(obj.half_extents, obj.base_half_extents))


def _between(p, a, b) -> bool:
    ax, ay = a[0], a[1]
    dx, dy = b[0] - ax, b[1] - ay
    ll = dx * dx + dy * dy
    if ll < 1e-12:
        return False
    t = ((p[0] - ax) * dx + (p[1] - ay) * dy) / ll
    if not 0.0 < t < 1.0:
        return False
    off = abs((p[0] - ax) * dy - (p[1] - ay) * dx) / math.sqrt(ll)
    return off <= BETWEEN_WIDTH


def evaluate_state(
    scene: Scene,
    tol: Optional[Tolerances] = None,
    taus: Iterable[float] = (),
    focus: Optional[Iterable[str]] = None,
    geometry: Optional[SceneGeometry] = None,
) -> frozenset:
    """Ground every predicate on the scene. With ``focus``, only atoms mentioning a focus id are emitted."""
    tol = tol or Tolerances()
    g = geometry or SceneGeometry(scene, tol)
    objs = scene.objects
    focus = None if focus is None else set(focus)

    def wanted(*ids) -> bool:
        return focus is None or any(i in focus for i in ids)

    out = []
    add = out.append
    taus = sorted({float(t) for t in taus})

    for oid in sorted(objs):
        if not wanted(oid):
            continue
        o = objs[oid]
        add(GroundAtom("exists", (oid,)))
        add(GroundAtom("at", (oid, o.pose.position)))
        if o.locked:
            add(GroundAtom("locked", (oid,)))
        if o.group_parent is not None:
            add(GroundAtom("grouped_with", (oid, o.group_parent)))
        style = normalize_style(o.style)
        if style:
            add(GroundAtom("has_style", (oid, Text(style))))
        add(GroundAtom("has_scale", (oid, *_scale_ratios(o))))
    for rid in scene.removed:
        if wanted(rid):
            add(GroundAtom("removed", (rid,)))

    styles = {oid: normalize_style(objs[oid].style) for oid in objs}
    for a in sorted(objs):
        for b in sorted(objs):
            if a != b and styles[a] and styles[a] == styles[b] and wanted(a, b):
                add(GroundAtom("matches_style", (a, b)))

    on_map = g.on_map
    for oid in sorted(objs):
        if not wanted(oid):
            continue
        if not any(s == oid for s in on_map.values()):
            add(GroundAtom("clear", (oid,)))

    placed = g.placed
    for oid in placed:
        sup = on_map.get(oid)
        if sup is not None and wanted(oid, sup):
            add(GroundAtom("on", (oid, sup)))
        for sid, _ in g.support_table.get(oid, []):
            if wanted(oid, sid):
                add(GroundAtom("supported", (oid, sid)))
        if not wanted(oid):
            continue
        if not g.support_table.get(oid) and sup == FLOOR:
            add(GroundAtom("supported", (oid, FLOOR)))
        if sup == FLOOR:
            add(GroundAtom("contact", (oid, FLOOR)))
        if g.is_stable(oid):
            add(GroundAtom("stable", (oid,)))
        if g.accessible(oid):
            add(GroundAtom("accessible", (oid,)))
        for view in sorted(scene.viewpoints):
            if g.visible(oid, scene.viewpoints[view]):
                add(GroundAtom("visible", (oid, view)))

    boxes = g.boxes
    close = {}
    for i, a in enumerate(placed):
        for b in placed[i + 1 :]:
            ca, cb = boxes[a].center, boxes[b].center
            if math.hypot(ca.x - cb.x, ca.y - cb.y) <= PAIR_CUTOFF:
                close.setdefault(a, set()).add(b)
                close.setdefault(b, set()).add(a)

    eps = tol.collision_eps
    for a in placed:
        for b in sorted(close.get(a, ())):
            if a > b or not wanted(a, b):
                continue
            ba, bb = boxes[a], boxes[b]
            if geo.obb_penetration(ba, bb) > eps:
                add(GroundAtom("colliding", (a, b)))
                add(GroundAtom("colliding", (b, a)))
            if geo.obb_separation(ba, bb) <= eps:
                add(GroundAtom("contact", (a, b)))
                add(GroundAtom("contact", (b, a)))
            d = geo.distance_xy(ba, bb)
            if d <= tol.near_default:
                add(GroundAtom("near", (a, b)))
                add(GroundAtom("near", (b, a)))
            for tau in taus:
                if d <= tau:
                    add(GroundAtom("near", (a, b, tau)))
                    add(GroundAtom("near", (b, a, tau)))
            for axis, k in zip(AXES, range(3)):
                if abs(ba.center[k] - bb.center[k]) <= ALIGN_TOL:
                    add(GroundAtom("aligned_with", (a, b, axis)))
                    add(GroundAtom("aligned_with", (b, a, axis)))

    for a in placed:
        oa = objs[a]
        for b in sorted(close.get(a, ())):
            if not wanted(a, b):
                continue
            try:
                if geo.facing(oa.pose, oa.front_axis, boxes[b].center, tol.facing_cone):
                    add(GroundAtom("is_facing", (a, b)))
            except geo.DegenerateDirection:
                pass
            for view in sorted(scene.viewpoints):
                vp = scene.viewpoints[view]
                lateral, depth = geo.view_offsets(boxes[a].center, boxes[b].center, vp)
                if lateral < -geo.DEAD_BAND:
                    add(GroundAtom("left_of", (a, b, view)))
                elif lateral > geo.DEAD_BAND:
                    add(GroundAtom("right_of", (a, b, view)))
                if depth < -geo.DEAD_BAND:
                    add(GroundAtom("in_front_of", (a, b, view)))
                elif depth > geo.DEAD_BAND:
                    add(GroundAtom("behind", (a, b, view)))

    for o in placed:
        near_o = close.get(o, set())
        for a in sorted(near_o):
            for b in sorted(near_o):
                if a == b or b not in close.get(a, ()) or not wanted(o, a, b):
                    continue
                if _between(boxes[o].center, boxes[a].center, boxes[b].center):
                    add(GroundAtom("between", (o, a, b)))

    return frozenset(out)


def holds(state, atom) -> bool:
    if not isinstance(atom, GroundAtom):
        raise MalformedAtom(f"not a ground atom: {atom!r}")
    if any(isinstance(t, str) and t.endswith("*") for t in atom.args):
        raise MalformedAtom(f"atom still contains a wildcard: {atom}")
    return atom in state


def diff_states(before, after) -> tuple:
    before, after = frozenset(before), frozenset(after)
    return after - before, before - after


def sorted_atoms(atoms) -> list:
    return sorted(atoms, key=str)


def format_state(atoms) -> str:
    return "".join(f"{a}\n" for a in sorted(str(x) for x in atoms))


def vocabulary_ok(atom: GroundAtom) -> bool:
    return atom.predicate in PREDICATES
