"""Proposal policy backed by an external service, with golden-file record and replay."""

from __future__ import annotations

import hashlib
import json
import os
import socket
import urllib.error
import urllib.request
from dataclasses import dataclass
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from pathlib import Path
from typing import Optional

from .domain import ground_domain
from .lang import ACTIONS, GoalDocument, LangError, PREDICATES, match_signature, parse_call, parse_goals
from .scene import FLOOR

PROTOCOL_VERSION = 1
DEFAULT_ATOM_CAP = 400


class RemoteError(Exception):
    pass


class Timeout(RemoteError):
    pass


class TransportError(RemoteError):
    pass


class MalformedResponse(RemoteError):
    pass


def canonical_json(doc) -> str:
    return json.dumps(doc, sort_keys=True, separators=(",", ":"), ensure_ascii=False)


def request_key(doc) -> str:
    return hashlib.sha256(canonical_json(doc).encode("utf-8")).hexdigest()


def menu_digest(scene) -> str:
    """Hash of the grounded-action menu, so the service can tell which scene it is planning on."""
    text = "\n".join(str(s) for s in ground_domain(scene))
    return hashlib.sha256(text.encode("utf-8")).hexdigest()


def relevant_state(state, goals, cap: int = DEFAULT_ATOM_CAP) -> list:
    """Source atoms mentioning an object named in the goals, sorted and capped."""
    ids = set()
    for g in goals:
        ids |= g.objects()
    picked = sorted(str(a) for a in state if a.objects() & ids)
    return picked[:cap]


@dataclass
class Transport:
    """JSON-over-HTTP POST with an optional bearer token."""

    endpoint: str
    timeout: float = 30.0
    token: Optional[str] = None

    def __call__(self, path: str, doc: dict) -> dict:
        url = self.endpoint.rstrip("/") + path
        body = canonical_json(doc).encode("utf-8")
        headers = {"Content-Type": "application/json"}
        if self.token:
            headers["Authorization"] = f"Bearer {self.token}"
        req = urllib.request.Request(url, data=body, headers=headers, method="POST")
        try:
            with urllib.request.urlopen(req, timeout=self.timeout) as resp:
                raw = resp.read()
        except (socket.timeout, TimeoutError) as exc:
            raise Timeout(f"no response from {url} within {self.timeout}s") from exc
        except urllib.error.URLError as exc:
            if isinstance(getattr(exc, "reason", None), (socket.timeout, TimeoutError)):
                raise Timeout(f"no response from {url} within {self.timeout}s") from exc
            raise TransportError(f"{url}: {exc}") from exc
        except OSError as exc:
            raise TransportError(f"{url}: {exc}") from exc
        try:
            return json.loads(raw.decode("utf-8"))
        except (UnicodeDecodeError, json.JSONDecodeError) as exc:
            raise MalformedResponse(f"response is not JSON: {exc}") from exc


class Exchange:
    """Sends requests live, from recorded fixtures, or live while recording them."""

    def __init__(self, transport=None, record_dir=None, replay_dir=None):
        if record_dir and replay_dir:
            raise ValueError("record and replay are mutually exclusive")
        if transport is None and not replay_dir:
            raise ValueError("a live transport is needed unless replaying")
        self.transport = transport
        self.record_dir = Path(record_dir) if record_dir else None
        self.replay_dir = Path(replay_dir) if replay_dir else None

    def send(self, path: str, doc: dict) -> dict:
        key = request_key({"path": path, "body": doc})
        if self.replay_dir is not None:
            f = self.replay_dir / f"{key}.json"
            if not f.exists():
                raise TransportError(f"no recorded response for request {key[:12]}")
            return json.loads(f.read_text())["response"]
        try:
            resp = self.transport(path, doc)
        except TransportError:
            # One retry on transport failure; timeouts and malformed bodies are not retried.
            resp = self.transport(path, doc)
        if self.record_dir is not None:
            self.record_dir.mkdir(parents=True, exist_ok=True)
            entry = {"path": path, "request": doc, "response": resp}
            (self.record_dir / f"{key}.json").write_text(json.dumps(entry, indent=2, sort_keys=True) + "\n")
        return resp


def _check_envelope(resp, field: str) -> str:
    if not isinstance(resp, dict):
        raise MalformedResponse("response must be an object")
    if resp.get("version") != PROTOCOL_VERSION:
        raise MalformedResponse(f"unsupported protocol version {resp.get('version')!r}")
    value = resp.get(field)
    if not isinstance(value, str):
        raise MalformedResponse(f"response field '{field}' must be a string")
    return value


class RemotePolicy:
    """ProposalPolicy that asks a service for one action per call.

    Failures never raise into the planner: they are reported as ``None`` with the reason kept in
    ``last_rationale``, which the planner records as a rejected attempt.
    """

    def __init__(self, exchange: Exchange, atom_cap: int = DEFAULT_ATOM_CAP):
        self.exchange = exchange
        self.atom_cap = atom_cap
        self.last_rationale = ""
        self._digest = None

    def build_request(self, goals, s0, partial, feedback) -> dict:
        scene = partial.session.scene
        if self._digest is None or self._digest[0] is not scene:
            self._digest = (scene, menu_digest(scene))
        return {
            "version": PROTOCOL_VERSION,
            "goals": sorted(str(g) for g in goals),
            "state": relevant_state(s0, goals, self.atom_cap),
            "partial_plan": [str(a.call) for a in partial.actions],
            "satisfied": sorted(str(a) for a in partial.satisfied),
            "feedback": feedback,
            "menu_digest": self._digest[1],
        }

    def propose(self, goals, s0, partial, feedback=None):
        req = self.build_request(goals, s0, partial, feedback)
        try:
            resp = self.exchange.send("/propose", req)
            text = _check_envelope(resp, "action")
            try:
                call = parse_call(text)
            except LangError as exc:
                raise MalformedResponse(f"cannot parse action {text!r}: {exc}") from None
            scene = partial.session.scene
            sig = match_signature(ACTIONS, call.name, call.args)
            for i, (kind, a) in enumerate(zip(sig, call.args)):
                if kind not in ("obj", "surf") or a == FLOOR:
                    continue
                if call.name == "add_object" and i == 0:
                    continue
                if a not in scene.objects:
                    raise MalformedResponse(f"response names unknown object {a}")
        except RemoteError as exc:
            self.last_rationale = f"{type(exc).__name__}: {exc}"
            return None
        rationale = resp.get("rationale")
        self.last_rationale = rationale if isinstance(rationale, str) else ""
        return call


def translate_instruction(text: str, scene, exchange: Exchange) -> GoalDocument:
    """Ask the service to turn an instruction into EditLang goals."""
    if not text.strip():
        return GoalDocument(())
    req = {"version": PROTOCOL_VERSION, "instruction": text, "menu_digest": menu_digest(scene), "objects": scene.ids()}
    resp = exchange.send("/translate", req)
    body = _check_envelope(resp, "goals")
    try:
        doc = parse_goals(body)
    except LangError as exc:
        raise MalformedResponse(f"goals outside the EditLang vocabulary: {exc}") from None
    for g in doc.goals:
        if g.predicate not in PREDICATES:
            raise MalformedResponse(f"unknown predicate {g.predicate}")
    return doc


# ---------------------------------------------------------------------------
# Reference service: answers proposals with the greedy policy. Useful for integration tests and demos.


def reference_answer(scene, cfg, request: dict) -> dict:
    from .lang import parse_atom
    from .planner import GreedyPolicy, PartialPlan, PlanningSession

    goals = frozenset(parse_atom(g) for g in request["goals"])
    taus = sorted({g.args[2] for g in goals if g.predicate == "near" and len(g.args) == 3})
    session = PlanningSession(scene, cfg, taus)
    ledger = frozenset(parse_atom(a) for a in request.get("satisfied", []))
    for text in request.get("partial_plan", []):
        try:
            inst = session.ground(parse_call(text))
        except Exception as exc:  # noqa: BLE001 - reported back as an empty answer
            return {"version": PROTOCOL_VERSION, "action": "", "rationale": f"cannot replay {text}: {exc}"}
        session.accept(inst)
    policy = GreedyPolicy()
    call = policy.propose(goals, session.s0, PartialPlan(tuple(session.accepted), ledger, session), request.get("feedback"))
    if call is None:
        return {"version": PROTOCOL_VERSION, "action": "", "rationale": policy.last_rationale}
    return {"version": PROTOCOL_VERSION, "action": str(call), "rationale": policy.last_rationale}


def make_reference_server(scene, cfg, host: str = "127.0.0.1", port: int = 0, translations=None):
    """ThreadingHTTPServer bound to host:port; call serve_forever() on a thread."""
    translations = dict(translations or {})

    class Handler(BaseHTTPRequestHandler):
        def do_POST(self):  # noqa: N802 - http.server naming
            length = int(self.headers.get("Content-Length", "0"))
            try:
                req = json.loads(self.rfile.read(length))
                if self.path == "/propose":
                    body = reference_answer(scene, cfg, req)
                elif self.path == "/translate":
                    body = {"version": PROTOCOL_VERSION, "goals": translations.get(req["instruction"], "")}
                else:
                    self.send_error(404)
                    return
            except Exception as exc:  # noqa: BLE001 - report server-side failures to the client
                self.send_error(500, str(exc))
                return
            data = canonical_json(body).encode("utf-8")
            self.send_response(200)
            self.send_header("Content-Type", "application/json")
            self.send_header("Content-Length", str(len(data)))
            self.end_headers()
            self.wfile.write(data)

        def log_message(self, *args):
            pass

    return ThreadingHTTPServer((host, port), Handler)


def exchange_from_config(endpoint=None, record=None, replay=None, timeout=30.0, token=None) -> Exchange:
    token = token or os.environ.get("SCENEEDIT_TOKEN")
    transport = Transport(endpoint, timeout, token) if endpoint else None
    return Exchange(transport, record, replay)
