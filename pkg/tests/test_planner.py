import random

import pytest

from sceneedit.lang import Call, Text, atom, parse_plan
from sceneedit.planner import GreedyPolicy, PlanFailure, PlannerConfig, PlanResult, check_plan, plan
from sceneedit.predicates import evaluate_state
from sceneedit.scene import FLOOR, dumps_scene
from taskgen import random_task

LAMP_PLAN = ["move_to(mug_1, [1.5, 2.0, 0.96])", "place_on(lamp_1, table_1, [1.0, 2.0, 0.95])"]


class Stubborn:
    """Always proposes the same irrelevant action."""

    def __init__(self, call):
        self.call = call
        self.calls = 0

    def propose(self, goals, s0, partial, feedback=None):
        self.calls += 1
        return self.call


def test_lamp_plan_and_trace(lamp_scene, lamp_goals):
    res = plan(lamp_scene, lamp_goals, GreedyPolicy())
    assert isinstance(res, PlanResult)
    assert [str(c) for c in res.plan.steps] == LAMP_PLAN
    assert res.trace.snapshots() == [["on(lamp_1, table_1)"], ["clear(table_1)"], []]
    assert res.trace.outcome == "success"
    assert atom("on", "lamp_1", "table_1") in res.final_state
    d = res.trace.to_dict()
    assert d["forward_plan"] == LAMP_PLAN and len(d["steps"]) == 2


def test_plan_is_deterministic(lamp_scene, lamp_goals):
    a = plan(lamp_scene, lamp_goals, GreedyPolicy())
    b = plan(lamp_scene, lamp_goals, GreedyPolicy())
    assert a.trace.to_dict() == b.trace.to_dict()
    assert dumps_scene(a.final_scene) == dumps_scene(b.final_scene)


def test_satisfied_goals_need_no_steps(lamp_scene):
    res = plan(lamp_scene, {atom("on", "mug_1", "table_1")}, GreedyPolicy())
    assert res.ok and res.plan.steps == ()


def test_retry_cap(lamp_scene, lamp_goals):
    policy = Stubborn(Call("stylize", ("shelf_1", Text("oak"))))
    res = plan(lamp_scene, lamp_goals, policy)
    assert isinstance(res, PlanFailure) and res.kind == "ExhaustedRetries"
    assert policy.calls == 3
    attempts = res.trace.steps[0].attempts
    assert len(attempts) == 3
    assert all(a.verdict.failed_check == "GoalDirectedness" for a in attempts)
    assert "Focus only on on(lamp_1, table_1)" in res.feedback


def test_retry_cap_configurable(lamp_scene, lamp_goals):
    policy = Stubborn(None)
    res = plan(lamp_scene, lamp_goals, policy, PlannerConfig(max_retries_per_step=5))
    assert res.kind == "ExhaustedRetries" and policy.calls == 5
    with pytest.raises(ValueError):
        PlannerConfig(max_retries_per_step=0)


def test_policy_exception_is_an_attempt(lamp_scene, lamp_goals):
    class Broken:
        def propose(self, *a, **k):
            raise RuntimeError("boom")

    res = plan(lamp_scene, lamp_goals, Broken())
    assert res.kind == "ExhaustedRetries"
    assert "boom" in res.trace.steps[0].attempts[0].rationale


def test_step_budget(lamp_scene, lamp_goals):
    res = plan(lamp_scene, lamp_goals, GreedyPolicy(), PlannerConfig(max_steps=1))
    assert res.kind == "StepBudgetExceeded"
    assert PlannerConfig().step_budget(3) == 38


def test_unsatisfiable(lamp_scene):
    res = plan(lamp_scene, {atom("on", "sofa_1", FLOOR)}, GreedyPolicy())
    assert res.kind == "UnsatisfiableGoal" and res.atom == "on(sofa_1, floor)"
    res = plan(lamp_scene, {atom("grouped_with", "lamp_1", "mug_1")}, GreedyPolicy())
    assert res.kind == "UnsatisfiableGoal"


def test_spawn_from_catalog(lamp_scene):
    goals = {atom("exists", "chair_1"), atom("on", "chair_1", FLOOR)}
    res = plan(lamp_scene, goals, GreedyPolicy())
    assert res.ok, res.message
    assert res.plan.steps[0].name == "add_object"
    assert "chair_1" in res.final_scene.objects


def test_check_plan_accepts_planned(lamp_scene, lamp_goals):
    res = plan(lamp_scene, lamp_goals, GreedyPolicy())
    chk = check_plan(lamp_scene, res.plan, lamp_goals)
    assert chk.ok and chk.missing == []
    assert [s.call for s in chk.steps] == LAMP_PLAN


def test_check_plan_flags_order(lamp_scene, lamp_goals):
    swapped = parse_plan("\n".join(reversed(LAMP_PLAN)) + "\n")
    chk = check_plan(lamp_scene, swapped, lamp_goals)
    bad = chk.first_rejection()
    assert not chk.ok and bad.index == 0
    assert bad.verdict.failed_check == "FormalValidity" and "clear(table_1)" in bad.verdict.message


def test_check_plan_flags_irrelevant(lamp_scene, lamp_goals):
    doc = parse_plan("stylize(shelf_1, \"oak\")\n" + "\n".join(LAMP_PLAN) + "\n")
    chk = check_plan(lamp_scene, doc, lamp_goals)
    assert chk.first_rejection().index == 0
    assert chk.first_rejection().verdict.failed_check == "GoalDirectedness"
    # Without goals only feasibility is checked.
    assert check_plan(lamp_scene, doc).ok


def test_check_plan_missing_goals(lamp_scene, lamp_goals):
    chk = check_plan(lamp_scene, parse_plan(LAMP_PLAN[0] + "\n"), lamp_goals)
    assert not chk.ok and chk.missing == ["on(lamp_1, table_1)"]


@pytest.mark.parametrize("seed", range(20))
def test_generated_tasks(seed):
    task = random_task(random.Random(seed))
    res = plan(task.scene, task.goals, GreedyPolicy())
    assert res.ok, f"{res.kind}: {res.message}"
    assert task.goals <= evaluate_state(res.final_scene)
