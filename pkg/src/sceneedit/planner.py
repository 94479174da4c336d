"""Backward goal-regression planning with validated proposals and a deterministic reference policy."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Optional, Protocol

from . import geometry as geo
from .domain import (
    ActionInstance,
    GroundingError,
    PreconditionUnsatisfied,
    SCHEMAS,
    achievable,
    apply,
    instantiate,
    new_object_id,
    regress,
    required,
)
from .executor import (
    ExecutionError,
    ExecutionRejected,
    Realizer,
    apply_resolved,
    candidate_surfaces,
    category_from_id,
    descendants,
    execute_plan,
    execute_step,
    find_placement,
)
from .geometry import Tolerances
from .lang import Call, GroundAtom, PlanDocument, Text, expand_wildcards
from .predicates import SceneGeometry, _between, evaluate_state, normalize_style
from .scene import FLOOR, Scene, world_obb
from .validator import RuleSet, Verdict, door_zones, validate

POSITIONAL = ("at", "on", "supported", "stable", "contact", "near", "between", "visible", "accessible")


@dataclass(frozen=True)
class PlannerConfig:
    max_retries_per_step: int = 3
    max_steps: Optional[int] = None
    tolerances: Tolerances = field(default_factory=Tolerances)
    rules: RuleSet = field(default_factory=RuleSet)

    def __post_init__(self):
        if self.max_retries_per_step < 1:
            raise ValueError("max_retries_per_step must be positive")
        if self.max_steps is not None and self.max_steps < 1:
            raise ValueError("max_steps must be positive")

    def step_budget(self, n_goals: int) -> int:
        return self.max_steps if self.max_steps is not None else 2 * n_goals + 32


@dataclass(frozen=True)
class PartialPlan:
    """What a policy sees besides the goals: accepted backward actions, the satisfied ledger and the session."""

    actions: tuple
    satisfied: frozenset
    session: "PlanningSession"
    rejected: tuple = ()


class ProposalPolicy(Protocol):
    def propose(self, goals: frozenset, s0: frozenset, partial: PartialPlan, feedback: Optional[str]):
        """Return a Call (or an ActionInstance, or None when nothing applies)."""


@dataclass
class Attempt:
    proposal: Optional[str]
    verdict: Verdict
    rationale: str = ""

    def to_dict(self) -> dict:
        d = {"proposal": self.proposal, "verdict": self.verdict.to_dict()}
        if self.rationale:
            d["rationale"] = self.rationale
        return d


@dataclass
class StepRecord:
    index: int
    goals_before: list
    attempts: list = field(default_factory=list)
    accepted: Optional[str] = None
    goals_after: Optional[list] = None
    satisfied: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "index": self.index,
            "goals_before": self.goals_before,
            "attempts": [a.to_dict() for a in self.attempts],
            "accepted": self.accepted,
            "goals_after": self.goals_after,
            "satisfied": self.satisfied,
        }


@dataclass
class PlanTrace:
    target: list
    initial_goals: list
    steps: list = field(default_factory=list)
    forward: list = field(default_factory=list)
    outcome: str = "running"

    def snapshots(self) -> list:
        """Goal sets G0, G1, ... after each accepted backward step."""
        out = [self.initial_goals]
        out.extend(s.goals_after for s in self.steps if s.goals_after is not None)
        return out

    def to_dict(self) -> dict:
        return {
            "version": 1,
            "target": self.target,
            "initial_goals": self.initial_goals,
            "steps": [s.to_dict() for s in self.steps],
            "forward_plan": self.forward,
            "outcome": self.outcome,
        }


@dataclass
class PlanFailure:
    kind: str  # ExhaustedRetries, StepBudgetExceeded, UnsatisfiableGoal, ReplayFailed
    message: str
    trace: PlanTrace
    step: Optional[int] = None
    atom: Optional[str] = None
    feedback: Optional[str] = None

    ok = False

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "message": self.message,
            "step": self.step,
            "atom": self.atom,
            "feedback": self.feedback,
        }


@dataclass
class PlanResult:
    plan: PlanDocument
    trace: PlanTrace
    actions: tuple  # forward-order ActionInstances
    final_scene: Scene
    final_state: frozenset

    ok = True


@dataclass
class Evaluation:
    instance: Optional[ActionInstance]
    verdict: Verdict
    goals_after: Optional[frozenset] = None


class PlanningSession:
    """State shared by the planner loop and the policy for one planning run."""

    def __init__(self, scene: Scene, cfg: PlannerConfig, taus=()):
        self.scene = scene
        self.cfg = cfg
        self.tol = cfg.tolerances
        self.rules = cfg.rules
        self.taus = tuple(sorted(set(taus)))
        self.geometry = SceneGeometry(scene, self.tol)
        self.s0 = evaluate_state(scene, self.tol, self.taus, geometry=self.geometry)
        self.accepted: list = []
        self.projected = scene
        self._cache: dict = {}
        self._zones = list(door_zones(scene, self.rules).values())

    # -- projections -------------------------------------------------------

    def blockers(self, surface: str) -> list:
        return sorted(o for o, s in self.geometry.on_map.items() if s == surface)

    def pending(self, goals: Iterable[GroundAtom]) -> set:
        """Objects that an earlier (forward) step still has to move: blockers of clear goals, positional subjects."""
        out = set()
        for g in goals:
            if g.predicate == "clear":
                out.update(self.blockers(g.args[0]))
            elif g.predicate in ("at", "on", "supported", "stable", "removed"):
                out.add(g.args[0])
        return out

    def obstacles(self, moving: Iterable[str], ignore: Iterable[str]) -> list:
        skip = set(moving) | set(ignore)
        boxes = []
        for sc in (self.scene, self.projected):
            for o in sc.placed_ids():
                if o not in skip:
                    boxes.append(world_obb(sc.objects[o]))
        return boxes + self._zones

    def replay(self, scene: Scene, actions: Iterable[ActionInstance]) -> Scene:
        for inst in actions:
            scene = apply_resolved(scene, inst.call, self.tol)
        return scene

    def accept(self, inst: ActionInstance):
        self.accepted.append(inst)
        self.projected = self.replay(self.scene, reversed(self.accepted))
        self._cache.clear()

    # -- proposal evaluation -----------------------------------------------

    def _moving(self, call: Call) -> list:
        subject = call.args[0]
        if call.name == "move_group" and subject in self.scene.objects:
            return [subject, *descendants(self.scene, subject)]
        return [subject]

    def _pre_guess(self, call: Call) -> set:
        schema = SCHEMAS[call.name]
        bindings = {p: a for (p, _), a in zip(schema.params, call.args)}
        out = set()
        for tpl in schema.pre:
            args = tuple(bindings.get(v) for v in tpl[1:])
            if None in args or (tpl[0] == "clear" and args[0] == FLOOR):
                continue
            try:
                out.add(GroundAtom(tpl[0], args))
            except Exception:  # noqa: BLE001 - malformed bindings surface later as FormalValidity
                continue
        return out - self.s0

    def realizer(self, call: Call, goals: frozenset) -> Realizer:
        ignore = self.pending(goals | self._pre_guess(call))
        return Realizer(self.tol, self.obstacles(self._moving(call), ignore))

    def search(self, subject: str, surfaces, anchor, goals: frozenset, accept=None, half=None):
        """Nearest feasible cell for ``subject`` under the session's occupancy; returns a center or None."""
        obj = self.scene.objects[subject]
        ignore = self.pending(goals)
        hit = find_placement(
            self.scene, half or obj.half_extents, obj.pose.yaw, surfaces, anchor,
            self.obstacles([subject, *descendants(self.scene, subject)], ignore), self.tol, accept,
        )
        return None if hit is None else hit[0]

    def ground(self, call: Call, goals: frozenset = frozenset()) -> ActionInstance:
        """Instantiate without validation (raises GroundingError)."""
        inst, _ = instantiate(call, self.scene, self.tol, self.taus, self.realizer(call, goals), self.pending(goals))
        return inst

    def evaluate(self, proposal, goals: frozenset, ledger: frozenset) -> Evaluation:
        call = proposal.call if isinstance(proposal, ActionInstance) else proposal
        key = (str(call), goals, ledger)
        if key in self._cache:
            return self._cache[key]
        ev = self._evaluate(call, goals, ledger)
        self._cache[key] = ev
        return ev

    def _evaluate(self, call: Call, goals: frozenset, ledger: frozenset) -> Evaluation:
        try:
            inst, step_preview = instantiate(
                call, self.scene, self.tol, self.taus, self.realizer(call, goals), self.pending(goals)
            )
        except GroundingError as exc:
            msg = str(exc)
            check = "PhysicalInvariant" if msg.startswith("no ") else "FormalValidity"
            hint = " Choose another target surface or clear it first." if check == "PhysicalInvariant" else ""
            return Evaluation(None, Verdict.reject(check, f"{call} cannot be grounded: {msg}.{hint}", [str(call)]))
        try:
            final_preview = self.replay(step_preview, reversed(self.accepted))
        except ExecutionError as exc:
            return Evaluation(
                inst, Verdict.reject("FormalValidity", f"{call} conflicts with the accepted plan: {exc}.", [str(call)])
            )
        after = regress(goals, inst, self.s0)
        verdict = validate(
            inst, goals, ledger, step_preview, self.tol, self.rules,
            base=self.scene, ignore=self.pending(after), extra_previews=(final_preview,),
        )
        return Evaluation(inst, verdict, after if verdict.accepted else None)


def _as_call(p) -> Call:
    return p.call if isinstance(p, ActionInstance) else p


def plan(scene: Scene, goals: Iterable[GroundAtom], policy: ProposalPolicy, cfg: Optional[PlannerConfig] = None):
    """Run the regression loop. Returns PlanResult on success and PlanFailure otherwise."""
    cfg = cfg or PlannerConfig()
    target = frozenset(expand_wildcards(goals, scene.ids()))
    taus = sorted({g.args[2] for g in target if g.predicate == "near" and len(g.args) == 3})
    session = PlanningSession(scene, cfg, taus)
    s0 = session.s0
    G = frozenset(target - s0)
    trace = PlanTrace(sorted(map(str, target)), sorted(map(str, G)))

    for g in sorted(G, key=str):
        if not achievable(g, scene):
            trace.outcome = "UnsatisfiableGoal"
            return PlanFailure("UnsatisfiableGoal", f"no grounded action can add {g}", trace, atom=str(g))

    ledger: frozenset = frozenset()
    budget = cfg.step_budget(len(target))
    while G:
        if len(session.accepted) >= budget:
            trace.outcome = "StepBudgetExceeded"
            return PlanFailure("StepBudgetExceeded", f"step budget of {budget} exhausted", trace, step=len(trace.steps))
        record = StepRecord(len(trace.steps), sorted(map(str, G)))
        trace.steps.append(record)
        feedback = None
        rejected: list = []
        chosen = None
        for _ in range(cfg.max_retries_per_step):
            partial = PartialPlan(tuple(session.accepted), ledger, session, tuple(rejected))
            try:
                proposal = policy.propose(G, s0, partial, feedback)
            except Exception as exc:  # noqa: BLE001 - a broken policy counts as a failed attempt
                proposal = None
                rationale = f"policy error: {exc}"
            else:
                rationale = getattr(policy, "last_rationale", "") or ""
            if proposal is None:
                verdict = Verdict.reject(
                    "FormalValidity",
                    rationale or "No applicable action was proposed. Propose one action that adds a current goal.",
                )
                record.attempts.append(Attempt(None, verdict, rationale))
                feedback = verdict.message
                continue
            call = _as_call(proposal)
            ev = session.evaluate(call, G, ledger)
            shown = str(ev.instance.call) if ev.instance is not None else str(call)
            record.attempts.append(Attempt(shown, ev.verdict, rationale))
            if ev.verdict.accepted:
                chosen = ev
                break
            rejected.append(str(call))
            feedback = ev.verdict.message
        if chosen is None:
            trace.outcome = "ExhaustedRetries"
            return PlanFailure(
                "ExhaustedRetries",
                f"step {record.index + 1}: {cfg.max_retries_per_step} proposals rejected",
                trace,
                step=record.index,
                feedback=feedback,
            )
        inst = chosen.instance
        ledger = ledger | (inst.add & G)
        G = chosen.goals_after
        session.accept(inst)
        record.accepted = str(inst.call)
        record.goals_after = sorted(map(str, G))
        record.satisfied = sorted(map(str, ledger))

    forward = list(reversed(session.accepted))
    trace.forward = [str(a.call) for a in forward]
    state = s0
    for i, inst in enumerate(forward):
        try:
            state = apply(state, inst)
        except PreconditionUnsatisfied as exc:
            trace.outcome = "ReplayFailed"
            return PlanFailure("ReplayFailed", f"symbolic replay, step {i + 1}: {exc}", trace, step=i)
    doc = PlanDocument(tuple(a.call for a in forward))
    try:
        final, states, _ = execute_plan(scene, doc, cfg.tolerances, cfg.rules, taus)
    except ExecutionRejected as exc:
        trace.outcome = "ReplayFailed"
        return PlanFailure(
            "ReplayFailed", f"geometric replay, step {exc.step + 1}: {exc.verdict.message}", trace, step=exc.step
        )
    missing = target - states[-1]
    if missing:
        trace.outcome = "ReplayFailed"
        names = ", ".join(sorted(map(str, missing)))
        return PlanFailure("ReplayFailed", f"executed plan leaves goals unsatisfied: {names}", trace)
    trace.outcome = "success"
    return PlanResult(doc, trace, tuple(forward), final, states[-1])


@dataclass
class StepCheck:
    index: int
    call: str
    verdict: Verdict

    def to_dict(self) -> dict:
        return {"index": self.index, "call": self.call, "verdict": self.verdict.to_dict()}


@dataclass
class PlanCheck:
    steps: list
    missing: list = field(default_factory=list)
    final_scene: Optional[Scene] = None

    @property
    def ok(self) -> bool:
        return not self.missing and all(s.verdict.accepted for s in self.steps)

    def first_rejection(self) -> Optional[StepCheck]:
        return next((s for s in self.steps if not s.verdict.accepted), None)

    def to_dict(self) -> dict:
        return {"ok": self.ok, "steps": [s.to_dict() for s in self.steps], "missing_goals": self.missing}


def check_plan(scene: Scene, plan_doc, goals=None, cfg: Optional[PlannerConfig] = None) -> PlanCheck:
    """Replay a plan step by step and return one verdict per step.

    The forward pass checks preconditions on the symbolic state and physical/contextual feasibility on
    the geometry. With goals, a backward pass then applies the same validator the planner uses, so
    steps that serve no goal or undo a satisfied one are reported too. Checking stops at the first
    forward rejection.
    """
    cfg = cfg or PlannerConfig()
    tol, rules = cfg.tolerances, cfg.rules
    steps = list(plan_doc.steps if isinstance(plan_doc, PlanDocument) else plan_doc)
    target = None if goals is None else frozenset(expand_wildcards(goals, scene.ids()))
    taus = sorted({g.args[2] for g in target or () if g.predicate == "near" and len(g.args) == 3})
    out = [StepCheck(i, str(c), Verdict.ok()) for i, c in enumerate(steps)]
    cur, state = scene, evaluate_state(scene, tol, taus)
    for i, call in enumerate(steps):
        try:
            if call.name in SCHEMAS:
                unmet = required(call) - state
                if unmet:
                    raise PreconditionUnsatisfied(unmet)
            inst, _ = instantiate(call, cur, tol, taus)
            state = apply(state, inst)
        except (GroundingError, PreconditionUnsatisfied) as exc:
            out[i].verdict = Verdict.reject("FormalValidity", f"{call}: {exc}", [str(call)])
            return PlanCheck(out[: i + 1], final_scene=cur)
        try:
            cur, resolved = execute_step(cur, call, tol, rules)
        except ExecutionRejected as exc:
            out[i].verdict = exc.verdict
            return PlanCheck(out[: i + 1], final_scene=cur)
        out[i].call = str(resolved)
        state = evaluate_state(cur, tol, taus)
    if target is None:
        return PlanCheck(out, final_scene=cur)
    session = PlanningSession(scene, cfg, taus)
    G, ledger = frozenset(target - session.s0), frozenset()
    for i in reversed(range(len(steps))):
        ev = session.evaluate(steps[i], G, ledger)
        if not ev.verdict.accepted:
            out[i].verdict = ev.verdict
            break
        ledger = ledger | (ev.instance.add & G)
        G = ev.goals_after
        session.accept(ev.instance)
    missing = sorted(map(str, target - state))
    return PlanCheck(out, missing, cur)


# ---------------------------------------------------------------------------
# Reference policy


class NoApplicableAction(Exception):
    pass


def _signed_degrees(rad: float) -> float:
    d = math.degrees(math.remainder(rad, 2 * math.pi))
    return round(d, 4) + 0.0


class GreedyPolicy:
    """Deterministic proposal policy.

    Candidates are achievers of the current goals that pass the validator. They are ranked by ordering
    conflicts, unmet preconditions, goal coverage, then (schema name, arguments). A conflict means the
    candidate's subject currently sits where another pending goal needs a different object, so that
    subject has to move earlier in the forward plan and is better chosen later in regression.
    """

    last_rationale = ""

    def propose(self, goals, s0, partial: PartialPlan, feedback=None):
        session = partial.session
        goals = frozenset(goals)
        seen = set(partial.rejected)
        future = _future_boxes(session, goals)
        best = None
        for g in sorted(goals, key=str):
            for call in self.achievers(g, session, goals):
                text = str(call)
                if text in seen:
                    continue
                seen.add(text)
                ev = session.evaluate(call, goals, partial.satisfied)
                if not ev.verdict.accepted:
                    continue
                inst = ev.instance
                conflicts = _conflicts(session, inst, future, goals)
                key = (conflicts, len(inst.pre - s0), -len(inst.add & goals), inst.name, str(inst.call))
                if best is None or key < best[0]:
                    best = (key, inst)
        if best is None:
            self.last_rationale = "no validated achiever for any current goal"
            return None
        key, inst = best
        self.last_rationale = f"unmet preconditions {key[1]}, covers {-key[2]} goal(s)"
        return inst.call

    # -- achiever generation ----------------------------------------------

    def _relocate(self, session, oid, goals, exclude=(), accept=None, anchor=None):
        scene = session.scene
        if oid not in scene.objects or scene.objects[oid].locked:
            return []
        surfaces = [s for s in candidate_surfaces(scene, oid) if s not in exclude]
        pos = session.search(oid, surfaces, anchor if anchor is not None else scene.objects[oid].position, goals, accept)
        return [] if pos is None else [Call("move_to", (oid, pos))]

    @staticmethod
    def _spawn(oid, scene, goals):
        """add_object for a missing object, honouring any pending at/on goals about it."""
        cat = category_from_id(oid)
        if scene.catalog_entry(cat) is None:
            return None
        surf, pos = FLOOR, None
        for g in sorted(goals, key=str):
            if g.args[0] != oid:
                continue
            if g.predicate == "on" and (g.args[1] == FLOOR or g.args[1] in scene.objects):
                surf = g.args[1]
            elif g.predicate == "at":
                pos = g.args[1]
        return Call("add_object", (oid, cat, surf) if pos is None else (oid, cat, surf, pos))

    def achievers(self, g: GroundAtom, session: PlanningSession, goals: frozenset) -> list:
        scene, proj = session.scene, session.projected
        p, a = g.predicate, g.args
        objs = scene.objects

        def movable(o):
            return o in objs and not objs[o].locked

        out = []
        if p in ("at", "on", "supported", "stable", "exists") and a[0] not in objs:
            spawn = self._spawn(a[0], scene, goals)
            return [] if spawn is None else [spawn]
        if p == "at" and movable(a[0]):
            out.append(Call("move_to", (a[0], a[1])))
        elif p in ("on", "supported") and movable(a[0]):
            if a[1] == FLOOR or a[1] in objs:
                out.append(Call("place_on", (a[0], a[1])))
                out += self._relocate(
                    session, a[0], goals, exclude=[s for s in candidate_surfaces(scene, a[0]) if s != a[1]]
                )
        elif p in ("stable",) and movable(a[0]):
            out += self._relocate(session, a[0], goals)
        elif p == "contact" and movable(a[0]):
            if a[1] == FLOOR:
                out.append(Call("place_on", (a[0], FLOOR)))
            elif a[1] in proj.objects:
                other = world_obb(proj.objects[a[1]])
                out += self._relocate(
                    session, a[0], goals, anchor=other.center,
                    accept=lambda box: geo.obb_separation(box, other) <= session.tol.collision_eps,
                )
        elif p == "clear":
            for y in session.blockers(a[0]):
                out += self._relocate(session, y, goals, exclude=[a[0]])
                if movable(y):
                    out.append(Call("remove_object", (y,)))
        elif p == "removed" and movable(a[0]):
            out.append(Call("remove_object", (a[0],)))
        elif p == "is_facing" and movable(a[0]) and a[1] in proj.objects:
            out.append(Call("rotate_towards", (a[0], a[1])))
            obj = objs[a[0]]
            want = geo.yaw_towards(obj.pose, obj.front_axis, proj.objects[a[1]].position)
            # The exact heading may be blocked; headings inside the facing cone also satisfy the goal.
            cone = session.tol.facing_cone
            for off in (0.0, 0.5 * cone, -0.5 * cone, 0.9 * cone, -0.9 * cone):
                deg = _signed_degrees(want + off - obj.pose.yaw)
                if deg != 0.0:
                    out.append(Call("rotate_by", (a[0], deg)))
        elif p == "near":
            tau = a[2] if len(a) == 3 else session.tol.near_default
            for mover, ref in ((a[0], a[1]), (a[1], a[0])):
                if movable(mover) and ref in proj.objects:
                    rbox = world_obb(proj.objects[ref])
                    out += self._relocate(
                        session, mover, goals, anchor=rbox.center,
                        accept=lambda box, rbox=rbox: geo.distance_xy(box, rbox) <= tau,
                    )
        elif p in geo.RELATIONS and movable(a[0]) and a[1] in objs:
            out.append(Call("place_relative", (a[0], a[1], p, a[2])))
        elif p == "aligned_with" and movable(a[0]) and a[1] in objs:
            out.append(Call("align_with", (a[0], a[1], a[2])))
        elif p == "has_style" and movable(a[0]):
            out.append(Call("stylize", (a[0], a[1])))
        elif p == "matches_style":
            for o, ref in ((a[0], a[1]), (a[1], a[0])):
                if movable(o) and ref in objs and normalize_style(objs[ref].style):
                    out.append(Call("stylize", (o, Text(normalize_style(objs[ref].style)))))
        elif p == "has_scale" and movable(a[0]):
            out.append(Call("scale", (a[0], a[1], a[2], a[3])))
        elif p == "between" and movable(a[0]) and a[1] in proj.objects and a[2] in proj.objects:
            ca, cb = proj.objects[a[1]].position, proj.objects[a[2]].position
            mid = ((ca[0] + cb[0]) / 2, (ca[1] + cb[1]) / 2, objs[a[0]].position.z)
            out += self._relocate(session, a[0], goals, anchor=mid, accept=lambda box: _between(box.center, ca, cb))
        elif p == "visible" and movable(a[0]) and a[1] in scene.viewpoints:
            vp = scene.viewpoints[a[1]]

            def seen_from(box, oid=a[0]):
                g = SceneGeometry(proj.with_object(_at(objs[oid], box.center)), session.tol)
                return g.visible(oid, vp)

            out += self._relocate(session, a[0], goals, accept=seen_from)
        elif p == "accessible" and movable(a[0]):

            def reachable(box, oid=a[0]):
                return SceneGeometry(proj.with_object(_at(objs[oid], box.center)), session.tol).accessible(oid)

            out += self._relocate(session, a[0], goals, accept=reachable)
        return out


def _future_boxes(session, goals) -> dict:
    """Boxes that pending positional or scale goals will make objects occupy."""
    from dataclasses import replace

    out = {}
    objs = session.scene.objects
    for g in goals:
        o = g.args[0]
        if o not in objs:
            continue
        obj = objs[o]
        if g.predicate == "at":
            out.setdefault(o, []).append(world_obb(_at(obj, g.args[1])))
        elif g.predicate == "has_scale":
            half = tuple(b * k for b, k in zip(obj.base_half_extents, g.args[1:4]))
            z = obj.position.z - obj.half_extents[2] + half[2]
            moved = replace(_at(obj, (obj.position.x, obj.position.y, z)), half_extents=half)
            out.setdefault(o, []).append(world_obb(moved))
    return out


def _conflicts(session, inst, future, goals) -> int:
    subjects = set(inst.touched)
    # Surfaces that a pending placement needs clear (place_on and add_object require it).
    targets = {g.args[1] for g in goals if g.predicate == "on" and g.args[0] not in subjects and g.args[1] != FLOOR}
    n = 0
    for s in sorted(subjects):
        if s not in session.scene.placed_ids():
            continue
        if session.geometry.on_map.get(s) in targets:
            n += 1
        box = world_obb(session.scene.objects[s])
        for o, boxes in future.items():
            if o in subjects:
                continue
            if any(geo.obb_penetration(box, b) > session.tol.collision_eps for b in boxes):
                n += 1
    return n


def _at(obj, center):
    from dataclasses import replace

    from .scene import Pose

    return replace(obj, pose=Pose(center, obj.pose.yaw))


__all__ = [
    "GreedyPolicy",
    "PlanCheck",
    "NoApplicableAction",
    "PartialPlan",
    "PlanFailure",
    "PlanResult",
    "PlanTrace",
    "PlannerConfig",
    "PlanningSession",
    "check_plan",
    "new_object_id",
    "plan",
]
