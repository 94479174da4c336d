"""Geometry-based scene metrics: out-of-boundary scenes and floating objects."""

from __future__ import annotations

from dataclasses import asdict, dataclass, field
from typing import Optional, Sequence

from .geometry import Tolerances
from .predicates import SceneGeometry
from .scene import Scene


class EmptyBatch(ValueError):
    pass


def oob_objects(scene: Scene, tol: Optional[Tolerances] = None) -> list:
    """Placed objects whose center lies outside the room AABB grown by ``oob_expand``."""
    tol = tol or Tolerances()
    return [
        o for o in scene.placed_ids() if not scene.bounds.contains(scene.objects[o].position, tol.oob_expand)
    ]


def eligible_objects(scene: Scene) -> list:
    return [o for o in scene.placed_ids() if not scene.objects[o].wall_mounted]


def grounded_objects(scene: Scene, tol: Optional[Tolerances] = None) -> set:
    """Fixpoint: floor contact, or resting (ratio at or above threshold) on something already grounded.

    Wall-mounted objects count as grounded supports.
    """
    tol = tol or Tolerances()
    g = SceneGeometry(scene, tol)
    grounded = {o for o in g.placed if scene.objects[o].wall_mounted}
    grounded |= {o for o in eligible_objects(scene) if g.floor_contact(o)}
    changed = True
    while changed:
        changed = False
        for o in eligible_objects(scene):
            if o in grounded:
                continue
            if any(s in grounded for s, _ in g.support_table.get(o, [])):
                grounded.add(o)
                changed = True
    return grounded


def floating_objects(scene: Scene, tol: Optional[Tolerances] = None) -> list:
    grounded = grounded_objects(scene, tol)
    return [o for o in eligible_objects(scene) if o not in grounded]


@dataclass
class SceneReport:
    name: str
    oob: list
    floating: list
    eligible: int


@dataclass
class MetricsReport:
    oob_scene_ratio: float
    floating_object_rate: float
    scenes: int
    eligible_objects: int
    floating_count: int
    per_scene: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return asdict(self)

    def table(self) -> str:
        rows = [("scene", "eligible", "floating", "oob")]
        for s in self.per_scene:
            rows.append((s["name"], str(s["eligible"]), ",".join(s["floating"]) or "-", ",".join(s["oob"]) or "-"))
        widths = [max(len(r[i]) for r in rows) for i in range(4)]
        lines = ["  ".join(c.ljust(w) for c, w in zip(r, widths)).rstrip() for r in rows]
        lines.append("")
        lines.append(f"OOB scene ratio:       {self.oob_scene_ratio:.2f}%")
        lines.append(f"floating object rate:  {self.floating_object_rate:.2f}%")
        return "\n".join(lines) + "\n"


def _pct(num: int, den: int) -> float:
    return round(100.0 * num / den, 2) if den else 0.0


def scene_metrics(scenes: Sequence, tol: Optional[Tolerances] = None, names: Optional[Sequence[str]] = None):
    """Batch report; values are percentages rounded to 2 decimals."""
    if not scenes:
        raise EmptyBatch("metrics need at least one scene")
    tol = tol or Tolerances()
    names = list(names) if names is not None else [f"scene_{i}" for i in range(len(scenes))]
    per = []
    for name, sc in zip(names, scenes):
        per.append(SceneReport(name, oob_objects(sc, tol), floating_objects(sc, tol), len(eligible_objects(sc))))
    n_oob = sum(1 for r in per if r.oob)
    n_float = sum(len(r.floating) for r in per)
    n_elig = sum(r.eligible for r in per)
    return MetricsReport(
        _pct(n_oob, len(per)), _pct(n_float, n_elig), len(per), n_elig, n_float, [asdict(r) for r in per]
    )
