"""Scene representation: objects, room bounds, catalog, viewpoints and the JSON file format."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace
from importlib import resources
from pathlib import Path
from typing import NamedTuple, Optional

import jsonschema

TWO_PI = 2.0 * math.pi
FLOOR = "floor"
SCHEMA_VERSION = 1
# Inventory objects are parked at least this far outside the room.
STAGING_MARGIN = 0.5


class Vec3(NamedTuple):
    x: float
    y: float
    z: float

    def __add__(self, other):  # type: ignore[override]
        return Vec3(self.x + other[0], self.y + other[1], self.z + other[2])

    def __sub__(self, other):
        return Vec3(self.x - other[0], self.y - other[1], self.z - other[2])


def normalize_yaw(yaw: float) -> float:
    y = math.fmod(yaw, TWO_PI)
    if y < 0.0:
        y += TWO_PI
    if y >= TWO_PI:
        y = 0.0
    return y + 0.0


@dataclass(frozen=True)
class Pose:
    position: Vec3
    yaw: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "position", Vec3(*map(float, self.position)))
        object.__setattr__(self, "yaw", normalize_yaw(float(self.yaw)))


@dataclass(frozen=True)
class OrientedBox:
    center: Vec3
    half_extents: Vec3
    yaw: float = 0.0


@dataclass(frozen=True)
class SceneObject:
    id: str
    category: str
    pose: Pose
    half_extents: Vec3
    front_axis: Vec3 = Vec3(0.0, 1.0, 0.0)
    style: str = ""
    wall_mounted: bool = False
    locked: bool = False
    support_parent: Optional[str] = None
    group_parent: Optional[str] = None
    # Reference extents for has_scale; catalog default or the extents at creation.
    base_half_extents: Optional[Vec3] = None

    def __post_init__(self):
        object.__setattr__(self, "half_extents", Vec3(*map(float, self.half_extents)))
        object.__setattr__(self, "front_axis", Vec3(*map(float, self.front_axis)))
        base = self.base_half_extents if self.base_half_extents is not None else self.half_extents
        object.__setattr__(self, "base_half_extents", Vec3(*map(float, base)))

    @property
    def position(self) -> Vec3:
        return self.pose.position

    @property
    def z_min(self) -> float:
        return self.pose.position.z - self.half_extents.z

    @property
    def z_max(self) -> float:
        return self.pose.position.z + self.half_extents.z


@dataclass(frozen=True)
class RoomBounds:
    min: Vec3
    max: Vec3
    floor_height: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "min", Vec3(*map(float, self.min)))
        object.__setattr__(self, "max", Vec3(*map(float, self.max)))

    def contains(self, p, expand: float = 0.0) -> bool:
        return all(self.min[i] - expand <= p[i] <= self.max[i] + expand for i in range(3))


@dataclass(frozen=True)
class CatalogEntry:
    category: str
    default_half_extents: Vec3
    style: str = ""

    def __post_init__(self):
        object.__setattr__(self, "default_half_extents", Vec3(*map(float, self.default_half_extents)))


@dataclass(frozen=True)
class Scene:
    """Immutable scene snapshot. ``objects`` maps id to object; treat it as read-only."""

    bounds: RoomBounds
    objects: dict = field(default_factory=dict)
    catalog: tuple = ()
    viewpoints: dict = field(default_factory=dict)
    removed: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, "catalog", tuple(self.catalog))
        object.__setattr__(self, "removed", tuple(sorted(set(self.removed))))

    def get(self, oid: str) -> SceneObject:
        return self.objects[oid]

    def ids(self) -> list:
        return sorted(self.objects)

    def is_staged(self, oid: str) -> bool:
        return is_staged(self.objects[oid], self.bounds)

    def placed_ids(self) -> list:
        return [oid for oid in sorted(self.objects) if not self.is_staged(oid)]

    def catalog_entry(self, category: str) -> Optional[CatalogEntry]:
        for entry in self.catalog:
            if entry.category == category:
                return entry
        return None

    def children_of(self, parent: str) -> list:
        return sorted(o.id for o in self.objects.values() if o.group_parent == parent)

    def supported_by(self, parent: str) -> list:
        return sorted(o.id for o in self.objects.values() if o.support_parent == parent)

    def with_object(self, obj: SceneObject) -> "Scene":
        objects = dict(self.objects)
        objects[obj.id] = obj
        return replace(self, objects=objects)

    def without_object(self, oid: str) -> "Scene":
        objects = {k: v for k, v in self.objects.items() if k != oid}
        for k, v in list(objects.items()):
            if v.group_parent == oid or v.support_parent == oid:
                objects[k] = replace(
                    v,
                    group_parent=None if v.group_parent == oid else v.group_parent,
                    support_parent=None if v.support_parent == oid else v.support_parent,
                )
        return replace(self, objects=objects, removed=tuple(self.removed) + (oid,))


def is_staged(obj: SceneObject, bounds: RoomBounds) -> bool:
    """Inventory objects: no support parent, not wall mounted, parked well outside the room."""
    return (
        obj.support_parent is None
        and not obj.wall_mounted
        and not bounds.contains(obj.pose.position, STAGING_MARGIN)
    )


def world_obb(obj: SceneObject) -> OrientedBox:
    return OrientedBox(obj.pose.position, obj.half_extents, obj.pose.yaw)


class SceneError(Exception):
    pass


class ParseError(SceneError):
    pass


class SchemaError(SceneError):
    def __init__(self, message: str, object_id: Optional[str] = None):
        super().__init__(message)
        self.object_id = object_id


def _schema() -> dict:
    text = resources.files("sceneedit").joinpath("scene-schema.json").read_text()
    return json.loads(text)


def _vec(v) -> list:
    return [float(c) for c in v]


def scene_to_dict(scene: Scene) -> dict:
    objects = []
    for oid in sorted(scene.objects):
        o = scene.objects[oid]
        objects.append(
            {
                "id": o.id,
                "category": o.category,
                "position": _vec(o.pose.position),
                "yaw": o.pose.yaw,
                "half_extents": _vec(o.half_extents),
                "base_half_extents": _vec(o.base_half_extents),
                "front_axis": _vec(o.front_axis),
                "style": o.style,
                "wall_mounted": o.wall_mounted,
                "locked": o.locked,
                "support_parent": o.support_parent,
                "group_parent": o.group_parent,
            }
        )
    return {
        "version": SCHEMA_VERSION,
        "bounds": {
            "min": _vec(scene.bounds.min),
            "max": _vec(scene.bounds.max),
            "floor_height": scene.bounds.floor_height,
        },
        "objects": objects,
        "catalog": [
            {"category": c.category, "default_half_extents": _vec(c.default_half_extents), "style": c.style}
            for c in scene.catalog
        ],
        "viewpoints": {
            name: {"position": _vec(p.position), "yaw": p.yaw} for name, p in sorted(scene.viewpoints.items())
        },
        "removed": list(scene.removed),
    }


def scene_from_dict(doc) -> Scene:
    try:
        jsonschema.validate(doc, _schema())
    except jsonschema.ValidationError as exc:
        oid = None
        path = list(exc.absolute_path)
        if len(path) >= 2 and path[0] == "objects" and isinstance(path[1], int):
            try:
                oid = doc["objects"][path[1]].get("id")
            except (AttributeError, IndexError, TypeError):
                oid = None
        where = "/".join(str(p) for p in path) or "<root>"
        raise SchemaError(f"{where}: {exc.message}", oid) from None

    b = doc["bounds"]
    bounds = RoomBounds(Vec3(*b["min"]), Vec3(*b["max"]), float(b.get("floor_height", b["min"][2])))
    if not all(bounds.min[i] < bounds.max[i] for i in range(3)):
        raise SchemaError("bounds: min must be below max on every axis")

    objects = {}
    for od in doc["objects"]:
        oid = od["id"]
        if oid in objects:
            raise SchemaError(f"duplicate object id {oid}", oid)
        if oid == FLOOR:
            raise SchemaError("'floor' is reserved", oid)
        half = Vec3(*od["half_extents"])
        if min(half) <= 0:
            raise SchemaError(f"{oid}: half_extents must be strictly positive", oid)
        base = od.get("base_half_extents")
        if base is not None and min(base) <= 0:
            raise SchemaError(f"{oid}: base_half_extents must be strictly positive", oid)
        if base is None:
            entry = next((c for c in doc.get("catalog", []) if c["category"] == od["category"]), None)
            base = entry["default_half_extents"] if entry else half
        front = Vec3(*od.get("front_axis", (0.0, 1.0, 0.0)))
        norm = math.sqrt(sum(c * c for c in front))
        if norm == 0.0:
            raise SchemaError(f"{oid}: front_axis must be nonzero", oid)
        values = list(od["position"]) + list(half) + [od.get("yaw", 0.0)]
        if not all(math.isfinite(v) for v in values):
            raise SchemaError(f"{oid}: non-finite pose or extents", oid)
        objects[oid] = SceneObject(
            id=oid,
            category=od["category"],
            pose=Pose(Vec3(*od["position"]), od.get("yaw", 0.0)),
            half_extents=half,
            front_axis=front if abs(norm - 1.0) < 1e-12 else Vec3(*(c / norm for c in front)),
            style=od.get("style", ""),
            wall_mounted=od.get("wall_mounted", False),
            locked=od.get("locked", False),
            support_parent=od.get("support_parent"),
            group_parent=od.get("group_parent"),
            base_half_extents=Vec3(*base),
        )

    for o in objects.values():
        if o.support_parent is not None and o.support_parent != FLOOR and o.support_parent not in objects:
            raise SchemaError(f"{o.id}: support_parent {o.support_parent} does not exist", o.id)
        if o.group_parent is not None and o.group_parent not in objects:
            raise SchemaError(f"{o.id}: group_parent {o.group_parent} does not exist", o.id)
        if o.support_parent == o.id or o.group_parent == o.id:
            raise SchemaError(f"{o.id}: object cannot reference itself", o.id)
    _check_acyclic(objects, "support_parent")
    _check_acyclic(objects, "group_parent")

    catalog = []
    for c in doc.get("catalog", []):
        if min(c["default_half_extents"]) <= 0:
            raise SchemaError(f"catalog {c['category']}: default_half_extents must be strictly positive")
        catalog.append(CatalogEntry(c["category"], Vec3(*c["default_half_extents"]), c.get("style", "")))

    viewpoints = {
        name: Pose(Vec3(*v["position"]), v.get("yaw", 0.0)) for name, v in doc.get("viewpoints", {}).items()
    }
    removed = doc.get("removed", [])
    for r in removed:
        if r in objects:
            raise SchemaError(f"{r} is listed as removed but still present", r)
    return Scene(bounds=bounds, objects=objects, catalog=tuple(catalog), viewpoints=viewpoints, removed=tuple(removed))


def _check_acyclic(objects: dict, attr: str):
    for start in objects:
        seen = {start}
        cur = getattr(objects[start], attr)
        while cur is not None and cur in objects:
            if cur in seen:
                raise SchemaError(f"{start}: {attr} chain contains a cycle", start)
            seen.add(cur)
            cur = getattr(objects[cur], attr)


def load_scene(path) -> Scene:
    text = Path(path).read_text()
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}: {exc}") from None
    return scene_from_dict(doc)


def dumps_scene(scene: Scene) -> str:
    return json.dumps(scene_to_dict(scene), indent=2) + "\n"


def save_scene(scene: Scene, path) -> None:
    Path(path).write_text(dumps_scene(scene))


def render_ascii(scene: Scene, width: int = 60) -> str:
    """Top-down character plot of the room; each placed object is drawn with its first id letter."""
    from .geometry import footprint

    b = scene.bounds
    sx = b.max.x - b.min.x
    sy = b.max.y - b.min.y
    height = max(4, int(round(width * sy / sx / 2)))
    grid = [["." for _ in range(width)] for _ in range(height)]
    legend = []
    symbols = "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789"
    for k, oid in enumerate(scene.placed_ids()):
        sym = symbols[k % len(symbols)]
        legend.append(f"{sym} {oid}")
        poly = footprint(world_obb(scene.objects[oid]))
        for row in range(height):
            for col in range(width):
                x = b.min.x + (col + 0.5) * sx / width
                y = b.max.y - (row + 0.5) * sy / height
                if _point_in_convex(poly, x, y):
                    grid[row][col] = sym
    lines = ["".join(r) for r in grid]
    staged = [oid for oid in scene.ids() if scene.is_staged(oid)]
    if staged:
        legend.append("inventory: " + ", ".join(staged))
    return "\n".join(lines + [""] + legend) + "\n"


def _point_in_convex(poly, x, y) -> bool:
    sign = 0
    n = len(poly)
    for i in range(n):
        x1, y1 = poly[i]
        x2, y2 = poly[(i + 1) % n]
        cross = (x2 - x1) * (y - y1) - (y2 - y1) * (x - x1)
        if cross != 0:
            s = 1 if cross > 0 else -1
            if sign == 0:
                sign = s
            elif s != sign:
                return False
    return True
