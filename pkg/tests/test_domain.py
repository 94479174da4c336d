import random
from collections import Counter
from dataclasses import replace

import pytest

from sceneedit.domain import (
    SCHEMAS,
    ActionInstance,
    ActionSchema,
    DomainError,
    GroundingError,
    PreconditionUnsatisfied,
    achievable,
    apply,
    classical_regress,
    ground_domain,
    instantiate,
    mutex_closure,
    regress,
    required,
)
from sceneedit.geometry import Tolerances
from sceneedit.lang import Call, Text, atom
from sceneedit.predicates import evaluate_state
from sceneedit.scene import FLOOR

TOL = Tolerances()
OBJS = ("a_1", "b_1", "c_1", "d_1")


def random_atom(rng):
    o, t = rng.sample(OBJS, 2)
    kind = rng.randrange(7)
    if kind == 0:
        return atom("on", o, rng.choice((t, FLOOR)))
    if kind == 1:
        return atom("clear", o)
    if kind == 2:
        return atom("exists", o)
    if kind == 3:
        return atom("removed", o)
    if kind == 4:
        return atom("at", o, [rng.randint(0, 3) * 0.5, 1.0, 0.5])
    if kind == 5:
        return atom("has_style", o, Text(rng.choice(("oak", "red"))))
    return atom("is_facing", o, t)


def random_instance(rng):
    pick = lambda k: {random_atom(rng) for _ in range(rng.randint(0, k))}  # noqa: E731
    add = pick(4)
    return ActionInstance(Call("rotate_by", ("a_1", 0.0)), pick(3), add, pick(3) - add)


def oracle_regress(goals, inst, s0):
    out = set()
    for g in goals:
        if g not in inst.add:
            out.add(g)
    for p in inst.pre:
        if p not in s0:
            out.add(p)
    return frozenset(out)


def test_schema_templates_are_bound():
    for s in SCHEMAS.values():
        names = {p for p, _ in s.params}
        for tpl in (*s.pre, *s.add, *s.delete):
            assert set(tpl[1:]) <= names
    with pytest.raises(ValueError):
        ActionSchema("bad", (("o", "obj"),), (("exists", "x"),))
    with pytest.raises(ValueError):
        ActionSchema("bad", (("o", "obj"),), add=(("exists", "o"),), delete=(("exists", "o"),))


def test_instance_rejects_overlap():
    a = atom("exists", "a_1")
    with pytest.raises(DomainError):
        ActionInstance(Call("remove_object", ("a_1",)), add={a}, delete={a})


def test_apply_matches_set_algebra():
    rng = random.Random(7)
    for _ in range(2000):
        inst = random_instance(rng)
        state = frozenset(random_atom(rng) for _ in range(rng.randint(0, 10))) | inst.pre
        out = apply(state, inst)
        dels = set(inst.delete) | set(mutex_closure(state, inst.add))
        assert out == (state - dels) | inst.add
        assert inst.add <= out


def test_apply_requires_preconditions():
    inst = ActionInstance(Call("remove_object", ("a_1",)), {atom("exists", "a_1"), atom("clear", "a_1")})
    with pytest.raises(PreconditionUnsatisfied) as e:
        apply({atom("exists", "a_1")}, inst)
    assert e.value.missing == (atom("clear", "a_1"),)


def test_mutex_closure_functional():
    state = {atom("on", "a_1", "b_1"), atom("at", "a_1", [0, 0, 0]), atom("on", "c_1", "b_1"), atom("has_style", "a_1", Text("oak"))}
    add = {atom("on", "a_1", FLOOR), atom("at", "a_1", [1, 1, 0])}
    assert mutex_closure(state, add) == {atom("on", "a_1", "b_1"), atom("at", "a_1", [0, 0, 0])}
    # Relational predicates are not functional.
    assert mutex_closure({atom("is_facing", "a_1", "b_1")}, {atom("is_facing", "a_1", "c_1")}) == frozenset()


def test_exists_removed_exclusive():
    e, r = atom("exists", "a_1"), atom("removed", "a_1")
    assert mutex_closure({e}, {r}) == {e}
    assert mutex_closure({r}, {e}) == {r}
    rng = random.Random(3)
    for _ in range(500):
        inst = random_instance(rng)
        state = frozenset(random_atom(rng) for _ in range(8)) | inst.pre
        out = apply(state, inst)
        for o in OBJS:
            if atom("exists", o) in inst.add and atom("removed", o) not in inst.add:
                assert atom("removed", o) not in out
            if atom("removed", o) in inst.add and atom("exists", o) not in inst.add:
                assert atom("exists", o) not in out


def test_regress_oracle_and_classical():
    rng = random.Random(11)
    for _ in range(10_000):
        inst = random_instance(rng)
        goals = {random_atom(rng) for _ in range(rng.randint(0, 6))}
        s0 = {random_atom(rng) for _ in range(rng.randint(0, 8))}
        assert regress(goals, inst, s0) == oracle_regress(goals, inst, s0)
        assert regress(goals, inst, ()) == classical_regress(goals, inst)
        # Regression never adds goals beyond the preconditions.
        assert regress(goals, inst, s0) <= (frozenset(goals) | inst.pre)


def test_required_preconditions():
    assert required(Call("place_on", ("a_1", "b_1", [0, 0, 0]))) == {atom("exists", "a_1"), atom("clear", "b_1")}
    # clear(floor) is never a precondition.
    assert required(Call("place_on", ("a_1", FLOOR, [0, 0, 0]))) == {atom("exists", "a_1")}
    assert required(Call("remove_object", ("a_1",))) == {atom("exists", "a_1"), atom("clear", "a_1")}


def test_ground_domain_counts(lamp_scene):
    n = len(lamp_scene.ids())
    slots = ground_domain(lamp_scene)
    counts = Counter(s.name for s in slots)
    for name in ("move_to", "rotate_by", "scale", "remove_object", "stylize"):
        assert counts[name] == n
    assert counts["place_on"] == n * (n - 1)
    assert counts["rotate_towards"] == n * (n - 1)
    assert counts["align_with"] == 3 * n * (n - 1)
    assert counts["place_relative"] == 4 * len(lamp_scene.viewpoints) * n * (n - 1)
    assert counts["add_object"] == len(lamp_scene.catalog) * (n + 1)
    for s in slots:
        objs = [a for a in s.args[:2] if isinstance(a, str)]
        if s.name not in ("add_object",) and len(objs) == 2:
            assert objs[0] != objs[1]


def test_ground_domain_skips_locked(lamp_scene):
    locked = lamp_scene.with_object(replace(lamp_scene.objects["shelf_1"], locked=True))
    subjects = {s.args[0] for s in ground_domain(locked) if s.name != "add_object"}
    assert "shelf_1" not in subjects


def test_instantiate_place_on(lamp_scene):
    clear_table = lamp_scene.without_object("mug_1")
    inst, preview = instantiate(Call("place_on", ("lamp_1", "table_1", [1.0, 2.0, 0.95])), clear_table, TOL)
    assert atom("on", "lamp_1", "table_1") in inst.add
    assert atom("clear", "table_1") in inst.delete
    assert inst.touched == ("lamp_1",)
    s1 = apply(evaluate_state(clear_table, TOL), inst)
    assert atom("on", "lamp_1", "table_1") in s1
    assert preview.objects["lamp_1"].support_parent == "table_1"


def test_instantiate_unknown_object(lamp_scene):
    with pytest.raises(GroundingError):
        instantiate(Call("move_to", ("ghost_1", [1, 1, 0.5])), lamp_scene, TOL)


def test_remove_object_deletes_mentions(lamp_scene):
    s0 = evaluate_state(lamp_scene, TOL)
    inst, preview = instantiate(Call("remove_object", ("lamp_1",)), lamp_scene, TOL)
    s1 = apply(s0, inst)
    assert atom("removed", "lamp_1") in s1
    assert all(a == atom("removed", "lamp_1") or "lamp_1" not in a.objects() for a in s1)
    assert "lamp_1" in preview.removed


def test_achievable(lamp_scene):
    assert achievable(atom("on", "lamp_1", "table_1"), lamp_scene)
    assert achievable(atom("exists", "chair_1"), lamp_scene)
    assert achievable(atom("on", "chair_1", FLOOR), lamp_scene)
    assert not achievable(atom("on", "sofa_1", FLOOR), lamp_scene)
    assert not achievable(atom("grouped_with", "lamp_1", "mug_1"), lamp_scene)
    locked = lamp_scene.with_object(replace(lamp_scene.objects["lamp_1"], locked=True))
    assert not achievable(atom("on", "lamp_1", "table_1"), locked)
