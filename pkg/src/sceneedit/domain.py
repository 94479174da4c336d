"""EditLang action schemas, per-scene grounding, and the STRIPS transition with mutex closure."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Optional

from .executor import Realizer, apply_resolved, category_from_id, descendants, touched_ids
from .geometry import RELATIONS, Tolerances
from .lang import ACTIONS, AXES, Call, GroundAtom, PREDICATES, format_term, match_signature
from .predicates import SceneGeometry, evaluate_state
from .scene import FLOOR, Scene

FUNCTIONAL = ("at", "on", "has_style", "has_scale")
# Atoms that describe the whole room rather than the moved objects; never part of derived effects.
NON_LOCAL = ("visible", "accessible", "colliding")


@dataclass(frozen=True)
class ActionSchema:
    name: str
    params: tuple  # (param, kind)
    pre: tuple = ()  # atom templates: (predicate, param, ...)
    add: tuple = ()
    delete: tuple = ()

    def __post_init__(self):
        names = {p for p, _ in self.params}
        for tpl in (*self.pre, *self.add, *self.delete):
            missing = [v for v in tpl[1:] if v not in names]
            if missing:
                raise ValueError(f"{self.name}: template {tpl} uses unbound {missing}")
        if set(self.add) & set(self.delete):
            raise ValueError(f"{self.name}: add and delete templates overlap")


def _s(name, params, pre=(), add=(), delete=()):
    return ActionSchema(name, tuple(params), tuple(pre), tuple(add), tuple(delete))


SCHEMAS = {
    s.name: s
    for s in (
        _s("move_to", [("o", "obj"), ("p", "pos")], [("exists", "o")], [("at", "o", "p")]),
        _s("move_group", [("o", "obj"), ("p", "pos")], [("exists", "o")], [("at", "o", "p")]),
        _s(
            "place_relative",
            [("o", "obj"), ("ref", "obj"), ("rel", "rel"), ("view", "view"), ("p", "pos")],
            [("exists", "o"), ("exists", "ref")],
            [("@rel", "o", "ref", "view"), ("at", "o", "p")],
        ),
        _s(
            "place_on",
            [("o", "obj"), ("s", "surf"), ("p", "pos")],
            [("exists", "o"), ("clear", "s")],
            [("on", "o", "s"), ("supported", "o", "s"), ("stable", "o"), ("at", "o", "p")],
            [("clear", "s")],
        ),
        _s(
            "align_with",
            [("o", "obj"), ("t", "obj"), ("axis", "axis")],
            [("exists", "o"), ("exists", "t")],
            [("aligned_with", "o", "t", "axis")],
        ),
        _s(
            "rotate_towards",
            [("o", "obj"), ("t", "obj")],
            [("exists", "o"), ("exists", "t")],
            [("is_facing", "o", "t")],
        ),
        _s("rotate_by", [("o", "obj"), ("deg", "num")], [("exists", "o")]),
        _s(
            "scale",
            [("o", "obj"), ("sx", "num"), ("sy", "num"), ("sz", "num")],
            [("exists", "o")],
            [("has_scale", "o", "sx", "sy", "sz")],
        ),
        _s(
            "add_object",
            [("o", "obj"), ("cat", "cat"), ("s", "surf"), ("p", "pos")],
            [("clear", "s")],
            [("exists", "o"), ("on", "o", "s"), ("supported", "o", "s"), ("stable", "o"), ("at", "o", "p")],
            [("clear", "s")],
        ),
        _s("remove_object", [("o", "obj")], [("exists", "o"), ("clear", "o")], [("removed", "o")], [("exists", "o")]),
        _s("stylize", [("o", "obj"), ("d", "str")], [("exists", "o")], [("has_style", "o", "d")]),
    )
}


class DomainError(Exception):
    pass


class GroundingError(DomainError):
    """The call cannot be grounded on the scene (unknown ids, locked subject, no feasible placement)."""


class PreconditionUnsatisfied(DomainError):
    def __init__(self, missing):
        self.missing = tuple(sorted(missing, key=str))
        super().__init__("missing preconditions: " + ", ".join(str(a) for a in self.missing))


@dataclass(frozen=True)
class ActionInstance:
    call: Call
    pre: frozenset = frozenset()
    add: frozenset = frozenset()
    delete: frozenset = frozenset()
    touched: tuple = ()
    scope: tuple = ()

    def __post_init__(self):
        for name in ("pre", "add", "delete"):
            object.__setattr__(self, name, frozenset(getattr(self, name)))
        if self.add & self.delete:
            raise DomainError(f"{self.call}: add and delete overlap on {sorted(map(str, self.add & self.delete))}")

    @property
    def name(self) -> str:
        return self.call.name

    @property
    def bindings(self) -> dict:
        params = SCHEMAS[self.name].params
        return {p: a for (p, _), a in zip(params, self.call.args)}

    @property
    def referenced(self) -> tuple:
        sig = match_signature(ACTIONS, self.call.name, self.call.args)
        return tuple(a for k, a in zip(sig, self.call.args) if k in ("obj", "surf") and a != FLOOR)

    def __str__(self) -> str:
        return str(self.call)

    def to_dict(self) -> dict:
        return {
            "action": str(self.call),
            "pre": sorted(map(str, self.pre)),
            "add": sorted(map(str, self.add)),
            "del": sorted(map(str, self.delete)),
        }


def _template_atoms(templates, bindings: dict) -> set:
    out = set()
    for tpl in templates:
        pred = tpl[0]
        if pred == "@rel":
            pred = bindings["rel"]
        args = tuple(bindings[v] for v in tpl[1:])
        if pred == "clear" and args[0] == FLOOR:
            continue
        out.add(GroundAtom(pred, args))
    return out


def required(call: Call) -> frozenset:
    """Schema preconditions of ``call``; needs no concrete position."""
    schema = SCHEMAS[call.name]
    bindings = {p: a for (p, _), a in zip(schema.params, call.args)}
    return frozenset(_template_atoms(schema.pre, bindings))


def core_effects(call: Call) -> tuple:
    """(pre, add, del) from the schema templates alone."""
    schema = SCHEMAS[call.name]
    args = call.args
    if call.name in ("place_on", "add_object", "place_relative") and len(args) < len(schema.params):
        raise GroundingError(f"{call} needs a concrete position")
    if call.name == "move_to" and isinstance(args[1], str):
        raise GroundingError(f"{call} needs a concrete position")
    bindings = {p: a for (p, _), a in zip(schema.params, args)}
    return (
        _template_atoms(schema.pre, bindings),
        _template_atoms(schema.add, bindings),
        _template_atoms(schema.delete, bindings),
    )


def instantiate(
    call: Call,
    scene: Scene,
    tol: Optional[Tolerances] = None,
    taus: Iterable[float] = (),
    realizer: Optional[Realizer] = None,
    hidden: Iterable[str] = (),
) -> tuple:
    """Ground ``call`` on ``scene``: resolve continuous parameters, derive effects from the geometric preview.

    Returns (ActionInstance, preview scene). Template effects take precedence over derived ones.
    Objects in ``hidden`` (other than the touched ones) are left out when deriving effects, which is
    how the planner treats objects that an earlier step still has to move.
    """
    from .executor import ExecutionError

    tol = tol or Tolerances()
    realizer = realizer or Realizer(tol)
    subject = call.args[0]
    if call.name != "add_object":
        if subject not in scene.objects:
            raise GroundingError(f"unknown object {subject}")
        if scene.objects[subject].locked:
            raise GroundingError(f"{subject} is locked")
    elif subject in scene.objects:
        raise GroundingError(f"{subject} already exists")
    try:
        resolved = realizer.resolve(scene, call)
        preview = apply_resolved(scene, resolved, tol)
    except ExecutionError as exc:
        raise GroundingError(str(exc)) from None

    pre, add, delete = core_effects(resolved)
    touched = tuple(touched_ids(scene, resolved))
    hide = set(hidden) - set(touched)
    base, shown = (_hide(scene, hide), _hide(preview, hide)) if hide else (scene, preview)
    g0, g1 = SceneGeometry(base, tol), SceneGeometry(shown, tol)
    supports = {g0.on_map.get(t) for t in touched} | {g1.on_map.get(t) for t in touched}
    scope = sorted((set(touched) | supports) - {None, FLOOR})
    before = evaluate_state(base, tol, taus, focus=scope, geometry=g0)
    after = evaluate_state(shown, tol, taus, focus=scope, geometry=g1)
    d_add = {a for a in after - before if a.predicate not in NON_LOCAL}
    d_del = {a for a in before - after if a.predicate not in NON_LOCAL}
    if call.name == "remove_object":
        d_del |= {a for a in before if subject in a.objects()}
    add = set(add) | (d_add - delete)
    delete = (set(delete) | d_del) - add
    inst = ActionInstance(resolved, frozenset(pre), frozenset(add), frozenset(delete), touched, tuple(scope))
    return inst, preview


def _hide(scene: Scene, ids) -> Scene:
    return Scene(scene.bounds, {k: v for k, v in scene.objects.items() if k not in ids}, scene.catalog, scene.viewpoints, scene.removed)


def mutex_closure(state: Iterable[GroundAtom], add: Iterable[GroundAtom]) -> frozenset:
    """Atoms of ``state`` made false by the functional atoms in ``add``."""
    add = frozenset(add)
    keys = {}
    for a in add:
        if a.predicate in FUNCTIONAL:
            keys.setdefault((a.predicate, a.args[0]), set()).add(a)
    extra = set()
    for s in state:
        k = (s.predicate, s.args[0] if s.args else None)
        if k in keys and s not in keys[k]:
            extra.add(s)
    for a in add:
        if a.predicate == "exists":
            other = GroundAtom("removed", a.args)
        elif a.predicate == "removed":
            other = GroundAtom("exists", a.args)
        else:
            continue
        if other in state:
            extra.add(other)
    return frozenset(extra - add)


def apply(state: Iterable[GroundAtom], action: ActionInstance) -> frozenset:
    """s' = (s minus del*) plus add, with del* the mutex-closed delete list."""
    state = frozenset(state)
    missing = action.pre - state
    if missing:
        raise PreconditionUnsatisfied(missing)
    dels = action.delete | mutex_closure(state, action.add)
    return (state - dels) | action.add


def regress(goals: Iterable[GroundAtom], action: ActionInstance, s0: Iterable[GroundAtom]) -> frozenset:
    """Source-aware regression: (G minus add) plus the preconditions not already true in s0."""
    return (frozenset(goals) - action.add) | (action.pre - frozenset(s0))


def classical_regress(goals: Iterable[GroundAtom], action: ActionInstance) -> frozenset:
    return (frozenset(goals) - action.add) | action.pre


@dataclass(frozen=True)
class GroundedSlot:
    """A schema bound to concrete objects, with continuous parameters left open (``None``)."""

    name: str
    args: tuple = field(default=())

    def __str__(self) -> str:
        return f"{self.name}({', '.join('?' if a is None else format_term(a) for a in self.args)})"


def new_object_id(scene: Scene, category: str) -> str:
    taken = set(scene.objects) | set(scene.removed)
    n = 1
    while f"{category}_{n}" in taken:
        n += 1
    return f"{category}_{n}"


def ground_domain(scene: Scene) -> list:
    """Every schema over compatible object bindings; self-bindings and locked subjects are excluded."""
    ids = scene.ids()
    movable = [o for o in ids if not scene.objects[o].locked]
    views = sorted(scene.viewpoints)
    out = []
    for o in movable:
        out.append(GroundedSlot("move_to", (o, None)))
    for o in movable:
        if descendants(scene, o):
            out.append(GroundedSlot("move_group", (o, None)))
    for o in movable:
        for s in ids:
            if s != o:
                out.append(GroundedSlot("place_on", (o, s, None)))
    for o in movable:
        for r in ids:
            if r == o:
                continue
            for rel in RELATIONS:
                for v in views:
                    out.append(GroundedSlot("place_relative", (o, r, rel, v, None)))
            for axis in AXES:
                out.append(GroundedSlot("align_with", (o, r, axis)))
            out.append(GroundedSlot("rotate_towards", (o, r)))
    for o in movable:
        out.append(GroundedSlot("rotate_by", (o, None)))
        out.append(GroundedSlot("scale", (o, None, None, None)))
        out.append(GroundedSlot("remove_object", (o,)))
        out.append(GroundedSlot("stylize", (o, None)))
    for entry in scene.catalog:
        new = new_object_id(scene, entry.category)
        for s in [FLOOR, *ids]:
            out.append(GroundedSlot("add_object", (new, entry.category, s, None)))
    return out


# Predicates no schema can make true unless they already hold.
STATIC = ("grouped_with", "locked", "colliding")


def achievable(goal: GroundAtom, scene: Scene) -> bool:
    """Whether some grounded schema could add ``goal``; a static scan, not a plan."""
    if goal.predicate in STATIC:
        return False
    sig = match_signature(PREDICATES, goal.predicate, goal.args)

    def free(t):
        # A missing object counts when add_object can create it from the catalog.
        if t in scene.objects:
            return not scene.objects[t].locked
        return scene.catalog_entry(category_from_id(t)) is not None

    for kind, t in zip(sig, goal.args):
        if kind in ("obj", "surf") and t != FLOOR and t not in scene.objects and not free(t):
            return False
        if kind == "view" and t not in scene.viewpoints:
            return False
    if goal.predicate in ("exists", "clear"):
        return True
    if goal.predicate in ("at", "on", "supported", "stable", "has_style", "has_scale", "contact", "removed"):
        return free(goal.args[0])
    return any(free(t) for k, t in zip(sig, goal.args) if k == "obj")
