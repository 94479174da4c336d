"""Command-line front end.

Exit codes: 0 success, 1 usage, 2 domain failure (invalid document, plan, validation or execution), 3 I/O.
Errors go to stderr as ``error[CODE] message`` so they can be grepped.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from pathlib import Path

from .domain import DomainError
from .executor import ExecutionRejected, execute_plan, touched_ids
from .geometry import Tolerances
from .lang import GoalDocument, LangError, parse_any, parse_goals, parse_plan, print_document
from .metrics import EmptyBatch, scene_metrics
from .planner import GreedyPolicy, PlannerConfig, check_plan, plan
from .predicates import evaluate_state, sorted_atoms
from .scene import ParseError, SceneError, SchemaError, dumps_scene, load_scene, render_ascii
from .validator import RuleSet

EXIT_OK, EXIT_USAGE, EXIT_DOMAIN, EXIT_IO = 0, 1, 2, 3

PLAN_CODES = {
    "ExhaustedRetries": "PLAN-RETRY",
    "UnsatisfiableGoal": "PLAN-UNSAT",
    "StepBudgetExceeded": "PLAN-BUDGET",
    "ReplayFailed": "PLAN-REPLAY",
}
CHECK_CODES = {
    "FormalValidity": "FORMAL",
    "GoalDirectedness": "GOAL",
    "Monotonicity": "MONO",
    "PhysicalInvariant": "PHYS",
    "ContextualConsistency": "CONTEXT",
}

DEFAULT_CONFIG = {
    "tolerances": Tolerances().to_dict(),
    "rules": RuleSet().to_dict(),
    "planner": {"max_retries_per_step": 3, "max_steps": None},
    "remote": {"endpoint": None, "timeout": 30.0},
}


class CliError(Exception):
    def __init__(self, code: str, message: str, exit_code: int):
        super().__init__(message)
        self.code = code
        self.exit_code = exit_code


class UsageError(CliError):
    def __init__(self, message: str):
        super().__init__("USAGE", message, EXIT_USAGE)


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


# ---------------------------------------------------------------------------
# Configuration


def _merge(base: dict, extra: dict) -> dict:
    out = dict(base)
    for k, v in extra.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict):
            out[k] = _merge(out[k], v)
        else:
            out[k] = v
    return out


def effective_config(args) -> dict:
    cfg = json.loads(json.dumps(DEFAULT_CONFIG))
    if getattr(args, "config", None):
        cfg = _merge(cfg, _read_json(args.config))
    tol = cfg["tolerances"]
    for flag, key in (
        ("collision_eps", "collision_eps"),
        ("support_ratio", "support_ratio"),
        ("floor_tol", "floor_contact"),
        ("oob_expand", "oob_expand"),
        ("facing_cone", "facing_cone"),
    ):
        v = getattr(args, flag, None)
        if v is not None:
            tol[key] = v
    if getattr(args, "max_steps", None) is not None:
        cfg["planner"]["max_steps"] = args.max_steps
    if getattr(args, "endpoint", None):
        cfg["remote"]["endpoint"] = args.endpoint
    return cfg


def _objects(cfg: dict) -> tuple:
    try:
        tol = Tolerances(**cfg["tolerances"])
        rules = RuleSet(**cfg["rules"])
        pcfg = PlannerConfig(tolerances=tol, rules=rules, **cfg["planner"])
    except (TypeError, ValueError) as exc:
        raise CliError("CONFIG", f"invalid configuration: {exc}", EXIT_USAGE) from None
    return tol, rules, pcfg


# ---------------------------------------------------------------------------
# I/O helpers


def _read_text(path) -> str:
    try:
        return Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise CliError("IO", f"cannot read {path}: {exc.strerror or exc}", EXIT_IO) from None


def _write_text(path, text: str):
    try:
        p = Path(path)
        p.parent.mkdir(parents=True, exist_ok=True)
        p.write_text(text, encoding="utf-8")
    except OSError as exc:
        raise CliError("IO", f"cannot write {path}: {exc.strerror or exc}", EXIT_IO) from None


def _read_json(path):
    try:
        return json.loads(_read_text(path))
    except json.JSONDecodeError as exc:
        raise CliError("IO", f"{path} is not JSON: {exc}", EXIT_IO) from None


def _scene(path):
    if not Path(path).exists():
        raise CliError("IO", f"no such file: {path}", EXIT_IO)
    try:
        return load_scene(path)
    except SchemaError as exc:
        where = f" (object {exc.object_id})" if getattr(exc, "object_id", None) else ""
        raise CliError("SCENE-SCHEMA", f"{path}: {exc}{where}", EXIT_DOMAIN) from None
    except ParseError as exc:
        raise CliError("SCENE-PARSE", str(exc), EXIT_DOMAIN) from None
    except SceneError as exc:
        raise CliError("SCENE", f"{path}: {exc}", EXIT_DOMAIN) from None
    except OSError as exc:
        raise CliError("IO", f"cannot read {path}: {exc.strerror or exc}", EXIT_IO) from None


def _lang(path, kind: str):
    text = _read_text(path)
    try:
        if kind == "goals":
            return parse_goals(text)
        if kind == "plan":
            return parse_plan(text)
        return parse_any(text)
    except LangError as exc:
        raise CliError("LANG-PARSE", f"{path}:{exc}", EXIT_DOMAIN) from None


class Output:
    """Collects human text or a JSON document, depending on --json."""

    def __init__(self, as_json: bool):
        self.as_json = as_json
        self.doc: dict = {}

    def text(self, s: str):
        if not self.as_json:
            sys.stdout.write(s if s.endswith("\n") else s + "\n")

    def set(self, **kw):
        self.doc.update(kw)

    def flush(self):
        if self.as_json:
            sys.stdout.write(json.dumps(self.doc, indent=2, sort_keys=True) + "\n")


# ---------------------------------------------------------------------------
# Subcommands


def cmd_scene(args, cfg, out: Output) -> int:
    scene = _scene(args.file)
    if args.action == "validate":
        from .validator import check_invariants

        tol, _, _ = _objects(cfg)
        issues = check_invariants(scene, tol)
        out.set(file=str(args.file), objects=len(scene.objects), violations=[v.to_dict() for v in issues])
        out.text(f"{args.file}: schema ok, {len(scene.objects)} objects")
        for v in issues:
            out.text(f"warning: {v.kind} {', '.join(v.objects)}")
    elif args.action == "render-ascii":
        text = render_ascii(scene, args.width)
        out.set(plot=text)
        out.text(text)
    else:
        from .plotting import render_scene

        target = args.out or str(Path(args.file).with_suffix(".png"))
        render_scene(scene, target, title=Path(args.file).stem)
        out.set(figure=str(target))
        out.text(f"wrote {target}")
    return EXIT_OK


def cmd_lang(args, cfg, out: Output) -> int:
    doc = _lang(args.file, "any")
    canonical = print_document(doc)
    kind = "goals" if isinstance(doc, GoalDocument) else "plan"
    n = len(doc.goals) if kind == "goals" else len(doc.steps)
    if args.action == "fmt":
        changed = canonical != _read_text(args.file)
        if args.check:
            out.set(file=str(args.file), canonical=not changed)
            out.text(f"{args.file}: {'needs formatting' if changed else 'canonical'}")
            return EXIT_DOMAIN if changed else EXIT_OK
        if args.stdout:
            out.set(text=canonical)
            if not out.as_json:
                sys.stdout.write(canonical)
        elif changed:
            _write_text(args.file, canonical)
        out.set(file=str(args.file), changed=changed, kind=kind)
        if not args.stdout:
            out.text(f"{args.file}: {'reformatted' if changed else 'unchanged'}")
    else:
        out.set(file=str(args.file), kind=kind, count=n)
        out.text(f"{args.file}: ok ({n} {'goals' if kind == 'goals' else 'steps'})")
    return EXIT_OK


def cmd_state(args, cfg, out: Output) -> int:
    scene = _scene(args.scene)
    tol, _, _ = _objects(cfg)
    if args.view and args.view not in scene.viewpoints:
        raise CliError("STATE-VIEW", f"unknown viewpoint {args.view}", EXIT_DOMAIN)
    atoms = sorted_atoms(evaluate_state(scene, tol, args.tau or ()))
    if args.view:
        views = set(scene.viewpoints) - {args.view}
        atoms = [a for a in atoms if not set(a.args) & views]
    lines = [str(a) for a in atoms]
    out.set(atoms=lines)
    out.text("\n".join(lines))
    return EXIT_OK


def _policy(args, cfg):
    if args.policy == "greedy":
        return GreedyPolicy()
    from .remote import RemotePolicy, exchange_from_config

    endpoint = cfg["remote"].get("endpoint")
    if not endpoint and not args.replay:
        raise UsageError("--policy remote needs --endpoint (or remote.endpoint in the config) or --replay")
    if args.record and args.replay:
        raise UsageError("--record and --replay are mutually exclusive")
    exchange = exchange_from_config(endpoint, args.record, args.replay, cfg["remote"].get("timeout", 30.0))
    return RemotePolicy(exchange)


def _plan_failure(result) -> CliError:
    code = PLAN_CODES.get(result.kind, "PLAN")
    msg = result.message
    if result.feedback:
        msg += f" (last feedback: {result.feedback})"
    return CliError(code, msg, EXIT_DOMAIN)


def _run_plan(args, cfg, scene, goals, out):
    _, _, pcfg = _objects(cfg)
    result = plan(scene, goals, _policy(args, cfg), pcfg)
    if getattr(args, "trace", None):
        _write_text(args.trace, json.dumps(result.trace.to_dict(), indent=2, sort_keys=True) + "\n")
    return result


def cmd_plan(args, cfg, out: Output) -> int:
    scene = _scene(args.scene)
    goals = _lang(args.goals, "goals")
    result = _run_plan(args, cfg, scene, goals.goals, out)
    out.set(outcome=result.trace.outcome, trace=result.trace.to_dict())
    if not result.ok:
        out.set(failure=result.to_dict())
        out.flush()
        raise _plan_failure(result)
    text = print_document(result.plan)
    if args.out:
        _write_text(args.out, text)
    out.set(plan=[str(s) for s in result.plan.steps])
    if args.out:
        out.text(f"wrote {len(result.plan.steps)}-step plan to {args.out}")
    else:
        out.text(text)
    return EXIT_OK


def cmd_validate(args, cfg, out: Output) -> int:
    scene = _scene(args.scene)
    doc = _lang(args.plan, "plan")
    goals = _lang(args.goals, "goals").goals if args.goals else None
    _, _, pcfg = _objects(cfg)
    report = check_plan(scene, doc, goals, pcfg)
    out.set(**report.to_dict())
    for s in report.steps:
        status = "ok" if s.verdict.accepted else f"REJECTED [{s.verdict.failed_check}] {s.verdict.message}"
        out.text(f"step {s.index + 1}: {s.call}: {status}")
    if report.missing:
        out.text("unsatisfied goals: " + ", ".join(report.missing))
    bad = report.first_rejection()
    if bad is not None:
        out.flush()
        code = "VALIDATE-" + CHECK_CODES[bad.verdict.failed_check]
        raise CliError(code, f"step {bad.index + 1} ({bad.call}): {bad.verdict.message}", EXIT_DOMAIN)
    if report.missing:
        out.flush()
        raise CliError("VALIDATE-GOALS", "plan leaves goals unsatisfied: " + ", ".join(report.missing), EXIT_DOMAIN)
    return EXIT_OK


def _execute(scene, doc, tol, rules, snapshots=None):
    try:
        final, states, resolved = execute_plan(scene, doc, tol, rules)
    except ExecutionRejected as exc:
        code = "EXEC-" + CHECK_CODES.get(exc.verdict.failed_check, "FAIL")
        raise CliError(code, f"step {exc.step + 1}: {exc.verdict.message}", EXIT_DOMAIN) from None
    if snapshots:
        cur = scene
        _write_text(Path(snapshots) / "step_000.json", dumps_scene(cur))
        from .executor import apply_resolved

        for i, call in enumerate(resolved, 1):
            cur = apply_resolved(cur, call, tol)
            _write_text(Path(snapshots) / f"step_{i:03d}.json", dumps_scene(cur))
    return final, states, resolved


def cmd_exec(args, cfg, out: Output) -> int:
    scene = _scene(args.scene)
    doc = _lang(args.plan, "plan")
    tol, rules, _ = _objects(cfg)
    final, _, resolved = _execute(scene, doc, tol, rules, args.snapshots)
    _write_text(args.out, dumps_scene(final))
    if args.figure:
        from .plotting import render_before_after

        touched = sorted({t for c in resolved for t in touched_ids(final if c.name == "add_object" else scene, c)})
        render_before_after(scene, final, touched, args.figure)
    out.set(out=str(args.out), steps=[str(c) for c in resolved])
    out.text(f"executed {len(resolved)} steps; wrote {args.out}")
    return EXIT_OK


def _metrics_files(report, out_path: Path):
    """Write the JSON report plus a CSV table and a PNG chart next to it."""
    _write_text(out_path, json.dumps(report.to_dict(), indent=2, sort_keys=True) + "\n")
    csv_path = out_path.with_suffix(".csv")
    try:
        with open(csv_path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh)
            w.writerow(["scene", "eligible", "floating", "oob"])
            for s in report.per_scene:
                w.writerow([s["name"], s["eligible"], " ".join(s["floating"]), " ".join(s["oob"])])
    except OSError as exc:
        raise CliError("IO", f"cannot write {csv_path}: {exc.strerror or exc}", EXIT_IO) from None
    from .plotting import render_metrics

    png = render_metrics(report, out_path.with_suffix(".png"))
    return [str(out_path), str(csv_path), str(png)]


def cmd_metrics(args, cfg, out: Output) -> int:
    tol, _, _ = _objects(cfg)
    root = Path(args.scenes)
    if not root.is_dir():
        raise CliError("IO", f"not a directory: {root}", EXIT_IO)
    files = sorted(root.glob("*.json"))
    scenes = [_scene(f) for f in files]
    try:
        report = scene_metrics(scenes, tol, [f.stem for f in files])
    except EmptyBatch as exc:
        raise CliError("METRICS-EMPTY", f"{root}: {exc}", EXIT_DOMAIN) from None
    written = _metrics_files(report, Path(args.out)) if args.out else []
    if args.figures:
        from .plotting import render_scene

        for f, sc in zip(files, scenes):
            bad = {o for s in report.per_scene if s["name"] == f.stem for o in s["floating"] + s["oob"]}
            written.append(str(render_scene(sc, Path(args.figures) / f"{f.stem}.png", bad, f.stem)))
    out.set(report=report.to_dict(), files=written)
    out.text(report.table())
    return EXIT_OK


def cmd_pipeline(args, cfg, out: Output) -> int:
    scene = _scene(args.scene)
    tol, rules, _ = _objects(cfg)
    if args.goals:
        goals = _lang(args.goals, "goals").goals
    elif args.instruction:
        from .remote import RemoteError, exchange_from_config, translate_instruction

        endpoint = cfg["remote"].get("endpoint")
        if not endpoint and not args.replay:
            raise UsageError("--instruction needs --endpoint or --replay")
        ex = exchange_from_config(endpoint, args.record, args.replay, cfg["remote"].get("timeout", 30.0))
        try:
            goals = translate_instruction(args.instruction, scene, ex).goals
        except RemoteError as exc:
            raise CliError("REMOTE", str(exc), EXIT_DOMAIN) from None
    else:
        raise UsageError("pipeline needs --goals or --instruction")
    outdir = Path(args.out_dir) if args.out_dir else None
    if outdir is not None:
        args.trace = str(outdir / "trace.json")
    result = _run_plan(args, cfg, scene, goals, out)
    out.set(goals=[str(g) for g in goals], outcome=result.trace.outcome)
    if not result.ok:
        out.set(failure=result.to_dict())
        out.flush()
        raise _plan_failure(result)
    final, _, resolved = _execute(scene, result.plan, tol, rules)
    report = scene_metrics([final], tol, ["edited"])
    out.set(plan=[str(s) for s in result.plan.steps], metrics=report.to_dict())
    out.text(print_document(result.plan).rstrip("\n"))
    out.text(f"OOB scene ratio {report.oob_scene_ratio:.2f}%, floating object rate {report.floating_object_rate:.2f}%")
    if outdir is not None:
        _write_text(outdir / "goals.elg", print_document(GoalDocument(tuple(goals))))
        _write_text(outdir / "plan.elp", print_document(result.plan))
        save_path = outdir / "scene_edited.json"
        _write_text(save_path, dumps_scene(final))
        files = _metrics_files(report, outdir / "report.json")
        from .plotting import render_before_after

        touched = sorted({a for inst in result.actions for a in inst.touched})
        files.append(str(render_before_after(scene, final, touched, outdir / "before_after.png")))
        out.set(files=[str(outdir / "trace.json"), str(outdir / "plan.elp"), str(save_path), *files])
        out.text(f"wrote results to {outdir}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# Argument parsing


def _common() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(add_help=False)
    p.add_argument("--json", action="store_true", default=argparse.SUPPRESS, help="machine-readable output")
    p.add_argument("--config", default=argparse.SUPPRESS, help="JSON config file; flags override it")
    p.add_argument("--collision-eps", type=float, default=argparse.SUPPRESS)
    p.add_argument("--support-ratio", type=float, default=argparse.SUPPRESS)
    p.add_argument("--floor-tol", type=float, default=argparse.SUPPRESS)
    p.add_argument("--facing-cone", type=float, default=argparse.SUPPRESS, help="radians")
    return p


def _remote_flags(p):
    p.add_argument("--policy", choices=("greedy", "remote"), default="greedy")
    p.add_argument("--endpoint")
    rr = p.add_mutually_exclusive_group()
    rr.add_argument("--record", help="record remote exchanges into DIR")
    rr.add_argument("--replay", help="answer remote requests from fixtures in DIR (no network)")
    p.add_argument("--max-steps", type=int)


def build_parser() -> argparse.ArgumentParser:
    common = _common()
    root = _Parser(prog="sceneedit", description="Goal-regressive 3D scene editing.", parents=[common])
    root.add_argument("--print-config", action="store_true", help="print the effective configuration and exit")
    sub = root.add_subparsers(dest="command", parser_class=_Parser)

    sc = sub.add_parser("scene", help="scene files", parents=[common])
    sc_sub = sc.add_subparsers(dest="action", required=True, parser_class=_Parser)
    sc_sub.add_parser("validate", parents=[common]).add_argument("file")
    ra = sc_sub.add_parser("render-ascii", parents=[common])
    ra.add_argument("file")
    ra.add_argument("--width", type=int, default=60)
    rp = sc_sub.add_parser("render", parents=[common], help="top-down PNG plot")
    rp.add_argument("file")
    rp.add_argument("--out")

    lg = sub.add_parser("lang", help="EditLang documents", parents=[common])
    lg_sub = lg.add_subparsers(dest="action", required=True, parser_class=_Parser)
    fm = lg_sub.add_parser("fmt", parents=[common])
    fm.add_argument("file")
    fm.add_argument("--check", action="store_true", help="only report whether the file is canonical")
    fm.add_argument("--stdout", action="store_true", help="print instead of rewriting")
    lg_sub.add_parser("check", parents=[common]).add_argument("file")

    st = sub.add_parser("state", help="symbolic state", parents=[common])
    st_sub = st.add_subparsers(dest="action", required=True, parser_class=_Parser)
    ev = st_sub.add_parser("eval", parents=[common])
    ev.add_argument("scene")
    ev.add_argument("--view")
    ev.add_argument("--tau", type=float, action="append")

    pl = sub.add_parser("plan", help="plan from goals", parents=[common])
    pl.add_argument("--scene", required=True)
    pl.add_argument("--goals", required=True)
    _remote_flags(pl)
    pl.add_argument("--out")
    pl.add_argument("--trace")

    va = sub.add_parser("validate", help="check a plan step by step", parents=[common])
    va.add_argument("--scene", required=True)
    va.add_argument("--plan", required=True)
    va.add_argument("--goals")

    ex = sub.add_parser("exec", help="execute a plan", parents=[common])
    ex.add_argument("--scene", required=True)
    ex.add_argument("--plan", required=True)
    ex.add_argument("--out", required=True)
    ex.add_argument("--snapshots")
    ex.add_argument("--figure", help="before/after PNG")

    me = sub.add_parser("metrics", help="geometry metrics over a directory of scenes", parents=[common])
    me.add_argument("--scenes", required=True)
    me.add_argument("--out")
    me.add_argument("--oob-expand", type=float)
    me.add_argument("--figures", help="also render each scene into DIR")

    pi = sub.add_parser("pipeline", help="goals, plan, execute and score in one run", parents=[common])
    pi.add_argument("--scene", required=True)
    src = pi.add_mutually_exclusive_group()
    src.add_argument("--goals")
    src.add_argument("--instruction", help="natural-language instruction, translated by the remote service")
    _remote_flags(pi)
    pi.add_argument("--out-dir")
    return root


COMMANDS = {
    "scene": cmd_scene,
    "lang": cmd_lang,
    "state": cmd_state,
    "plan": cmd_plan,
    "validate": cmd_validate,
    "exec": cmd_exec,
    "metrics": cmd_metrics,
    "pipeline": cmd_pipeline,
}


def main(argv=None) -> int:
    out = Output("--json" in (argv if argv is not None else sys.argv[1:]))
    try:
        args = build_parser().parse_args(argv)
        out.as_json = getattr(args, "json", False)
        cfg = effective_config(args)
        if args.print_config:
            sys.stdout.write(json.dumps(cfg, indent=2, sort_keys=True) + "\n")
            return EXIT_OK
        if not args.command:
            raise UsageError("a subcommand is required")
        _objects(cfg)
        code = COMMANDS[args.command](args, cfg, out)
        out.flush()
        return code
    except CliError as exc:
        sys.stderr.write(f"error[{exc.code}] {exc}\n")
        return exc.exit_code
    except DomainError as exc:
        sys.stderr.write(f"error[DOMAIN] {exc}\n")
        return EXIT_DOMAIN
    except LangError as exc:
        sys.stderr.write(f"error[LANG-PARSE] {exc}\n")
        return EXIT_DOMAIN
    except OSError as exc:
        sys.stderr.write(f"error[IO] {exc}\n")
        return EXIT_IO


if __name__ == "__main__":
    raise SystemExit(main())


__all__ = ["main", "build_parser", "effective_config", "DEFAULT_CONFIG"]

