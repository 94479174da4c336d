"""EditLang text: ground atoms, action calls, goal and plan documents, parser and printer.

Grammar (one clause per line, ``#`` starts a comment)::

    clause    := directive | call
    directive := '@' IDENT term
    call      := IDENT '(' [term (',' term)*] ')'
    term      := IDENT ['*'] | NUMBER | '[' NUMBER ',' NUMBER ',' NUMBER ']' | STRING
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Iterable, Optional, Union

from .geometry import RELATIONS
from .scene import FLOOR, Vec3


@dataclass(frozen=True, order=True)
class Text:
    value: str


Term = Union[str, float, Vec3, Text]

AXES = ("x", "y", "z")

# Term kinds: obj, surf (object or floor), pos, num, scale, axis, view, rel, cat, str.
PREDICATES = {
    "exists": (("obj",),),
    "removed": (("obj",),),
    "at": (("obj", "pos"),),
    "on": (("obj", "surf"),),
    "between": (("obj", "obj", "obj"),),
    "near": (("obj", "obj"), ("obj", "obj", "num")),
    "aligned_with": (("obj", "obj", "axis"),),
    "is_facing": (("obj", "obj"),),
    "left_of": (("obj", "obj", "view"),),
    "right_of": (("obj", "obj", "view"),),
    "in_front_of": (("obj", "obj", "view"),),
    "behind": (("obj", "obj", "view"),),
    "grouped_with": (("obj", "obj"),),
    "locked": (("obj",),),
    "supported": (("obj", "surf"),),
    "contact": (("obj", "surf"),),
    "clear": (("obj",),),
    "stable": (("obj",),),
    "colliding": (("obj", "obj"),),
    "visible": (("obj", "view"),),
    "accessible": (("obj",),),
    "has_style": (("obj", "str"),),
    "matches_style": (("obj", "obj"),),
    "has_scale": (("obj", "scale", "scale", "scale"),),
}

ACTIONS = {
    "move_to": (("obj", "pos"), ("obj", "surf")),
    "move_group": (("obj", "pos"),),
    "place_relative": (("obj", "obj", "rel", "view"), ("obj", "obj", "rel", "view", "pos")),
    "place_on": (("obj", "surf"), ("obj", "surf", "pos")),
    "align_with": (("obj", "obj", "axis"),),
    "rotate_towards": (("obj", "obj"),),
    "rotate_by": (("obj", "num"),),
    "scale": (("obj", "num", "num", "num"),),
    "add_object": (("obj", "cat", "surf"), ("obj", "cat", "surf", "pos")),
    "remove_object": (("obj",),),
    "stylize": (("obj", "str"),),
}

_IDENT_KINDS = {"obj", "surf", "axis", "view", "rel", "cat"}


def quantize(x: float, places: int) -> float:
    return round(float(x), places) + 0.0


def _check_kind(kind: str, term, wildcard_ok: bool) -> bool:
    if kind in _IDENT_KINDS:
        if not isinstance(term, str):
            return False
        if term.endswith("*"):
            return wildcard_ok and kind == "obj"
        if kind == "obj":
            return term != FLOOR
        if kind == "axis":
            return term in AXES
        if kind == "rel":
            return term in RELATIONS
        return True
    if kind == "pos":
        return isinstance(term, tuple) and len(term) == 3
    if kind in ("num", "scale"):
        return isinstance(term, float)
    if kind == "str":
        return isinstance(term, Text)
    return False


def match_signature(table: dict, name: str, args: tuple, wildcard_ok: bool = False):
    """Return the matching kind tuple, raising on unknown names or mismatched arguments."""
    sigs = table[name]
    arities = sorted({len(s) for s in sigs})
    if len(args) not in arities:
        raise ArityError(f"{name} takes {' or '.join(map(str, arities))} arguments, got {len(args)}")
    for sig in sigs:
        if len(sig) == len(args) and all(_check_kind(k, t, wildcard_ok) for k, t in zip(sig, args)):
            return sig
    raise ArityError(f"{name}({', '.join(_kind_name(t) for t in args)}) does not match any signature of {name}")


def _kind_name(t) -> str:
    if isinstance(t, Text):
        return "string"
    if isinstance(t, tuple):
        return "position"
    if isinstance(t, float):
        return "number"
    return "identifier"


def _normalize_args(sig, args, pos_places: int) -> tuple:
    out = []
    for kind, t in zip(sig, args):
        if kind == "pos":
            out.append(Vec3(*(quantize(c, pos_places) for c in t)))
        elif kind == "scale":
            out.append(quantize(t, 2))
        elif kind == "num":
            out.append(quantize(t, 4))
        else:
            out.append(t)
    return tuple(out)


@dataclass(frozen=True)
class GroundAtom:
    predicate: str
    args: tuple = ()

    def __post_init__(self):
        if self.predicate not in PREDICATES:
            raise UnknownPredicate(f"unknown predicate {self.predicate}")
        args = tuple(_coerce(a) for a in self.args)
        sig = match_signature(PREDICATES, self.predicate, args, wildcard_ok=True)
        object.__setattr__(self, "args", _normalize_args(sig, args, 2))

    def __str__(self) -> str:
        return format_call(self.predicate, self.args)

    def __lt__(self, other) -> bool:
        return str(self) < str(other)

    def objects(self) -> set:
        sig = match_signature(PREDICATES, self.predicate, self.args, wildcard_ok=True)
        return {t for k, t in zip(sig, self.args) if k in ("obj", "surf") and t != FLOOR}

    @property
    def subject(self):
        return self.args[0] if self.args else None


def atom(predicate: str, *args) -> GroundAtom:
    return GroundAtom(predicate, tuple(args))


@dataclass(frozen=True)
class Call:
    """An action as written: schema name plus arguments, not yet grounded on a scene."""

    name: str
    args: tuple = ()

    def __post_init__(self):
        if self.name not in ACTIONS:
            raise UnknownAction(f"unknown action {self.name}")
        args = tuple(_coerce(a) for a in self.args)
        sig = match_signature(ACTIONS, self.name, args)
        object.__setattr__(self, "args", _normalize_args(sig, args, 4))

    def __str__(self) -> str:
        return format_call(self.name, self.args)


def _coerce(a):
    if isinstance(a, bool):
        raise TypeError("booleans are not EditLang terms")
    if isinstance(a, (int, float)):
        return float(a)
    if isinstance(a, str):
        return a.lower()
    if isinstance(a, (tuple, list)) and not isinstance(a, Text):
        return Vec3(*(float(c) for c in a))
    return a


# ---------------------------------------------------------------------------
# Documents


@dataclass(frozen=True)
class GoalDocument:
    goals: tuple = ()
    scene: Optional[str] = None

    def __post_init__(self):
        uniq = {str(g): g for g in self.goals}
        object.__setattr__(self, "goals", tuple(uniq[k] for k in sorted(uniq)))

    @property
    def viewpoints(self) -> list:
        views = set()
        for g in self.goals:
            for kind, t in zip(match_signature(PREDICATES, g.predicate, g.args, True), g.args):
                if kind == "view":
                    views.add(t)
        return sorted(views)

    @property
    def taus(self) -> list:
        return sorted({g.args[2] for g in self.goals if g.predicate == "near" and len(g.args) == 3})


@dataclass(frozen=True)
class PlanDocument:
    steps: tuple = ()
    scene: Optional[str] = None

    def __post_init__(self):
        object.__setattr__(self, "steps", tuple(self.steps))


# ---------------------------------------------------------------------------
# Errors


class LangError(Exception):
    def __init__(self, message: str, line: int = 0, col: int = 0):
        self.line = line
        self.col = col
        where = f"{line}:{col}: " if line else ""
        super().__init__(where + message)
        self.message = message


class LangSyntaxError(LangError):
    def __init__(self, message: str, line: int, col: int, expected: str = ""):
        super().__init__(message, line, col)
        self.expected = expected


class ArityError(LangError):
    pass


class UnknownPredicate(LangError):
    pass


class UnknownAction(LangError):
    pass


# ---------------------------------------------------------------------------
# Printer


def format_number(x: float) -> str:
    s = f"{float(x):.4f}".rstrip("0")
    if s.endswith("."):
        s += "0"
    if s in ("-0.0", "-0"):
        s = "0.0"
    return s


def format_term(t) -> str:
    if isinstance(t, Text):
        body = t.value.replace("\\", "\\\\").replace('"', '\\"').replace("\n", "\\n").replace("\t", "\\t")
        return f'"{body}"'
    if isinstance(t, tuple):
        return "[" + ", ".join(format_number(c) for c in t) + "]"
    if isinstance(t, float):
        return format_number(t)
    return str(t)


def format_call(name: str, args: Iterable) -> str:
    return f"{name}({', '.join(format_term(a) for a in args)})"


def print_document(doc: Union[GoalDocument, PlanDocument]) -> str:
    lines = []
    if doc.scene is not None:
        lines.append(f"@scene {format_term(Text(doc.scene))}")
    if isinstance(doc, GoalDocument):
        lines.extend(str(g) for g in doc.goals)
    else:
        lines.extend(format_call(s.name, s.args) for s in doc.steps)
    return "".join(line + "\n" for line in lines)


# ---------------------------------------------------------------------------
# Parser

_TOKEN = re.compile(
    r"""
    (?P<ws>[ \t\r]+)
  | (?P<comment>\#[^\n]*)
  | (?P<newline>\n)
  | (?P<number>-?(?:\d+(?:\.\d*)?|\.\d+)(?:[eE][-+]?\d+)?)
  | (?P<ident>[A-Za-z][A-Za-z0-9_]*\*?)
  | (?P<string>"(?:[^"\\\n]|\\.)*")
  | (?P<punct>[()\[\],@])
    """,
    re.VERBOSE,
)


@dataclass
class _Tok:
    kind: str
    text: str
    line: int
    col: int


def _tokenize(text: str) -> list:
    toks = []
    pos, line, line_start = 0, 1, 0
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        col = pos - line_start + 1
        if m is None:
            ch = text[pos]
            if ch == '"':
                raise LangSyntaxError("unterminated string", line, col, "closing quote")
            raise LangSyntaxError(f"unexpected character {ch!r}", line, col, "a term or punctuation")
        kind = m.lastgroup
        if kind == "newline":
            toks.append(_Tok("newline", "\n", line, col))
            line += 1
            line_start = m.end()
        elif kind not in ("ws", "comment"):
            toks.append(_Tok(kind, m.group(), line, col))
        pos = m.end()
    toks.append(_Tok("eof", "", line, pos - line_start + 1))
    return toks


_ESCAPES = {"n": "\n", "t": "\t", '"': '"', "\\": "\\"}


def _unescape(body: str, line: int, col: int) -> str:
    out = []
    i = 0
    while i < len(body):
        ch = body[i]
        if ch == "\\":
            nxt = body[i + 1]
            if nxt not in _ESCAPES:
                raise LangSyntaxError(f"unknown escape \\{nxt}", line, col + i + 1, "one of \\n \\t \\\" \\\\")
            out.append(_ESCAPES[nxt])
            i += 2
        else:
            out.append(ch)
            i += 1
    return "".join(out)


@dataclass
class _Clause:
    name: str
    args: tuple
    line: int
    col: int
    directive: bool = False
    arg_positions: list = field(default_factory=list)


class _Parser:
    def __init__(self, text: str):
        self.toks = _tokenize(text)
        self.i = 0

    def peek(self) -> _Tok:
        return self.toks[self.i]

    def take(self) -> _Tok:
        tok = self.toks[self.i]
        self.i += 1
        return tok

    def expect(self, kind: str, text: Optional[str] = None, what: str = "") -> _Tok:
        tok = self.peek()
        if tok.kind != kind or (text is not None and tok.text != text):
            want = what or (repr(text) if text else kind)
            got = "end of input" if tok.kind == "eof" else ("end of line" if tok.kind == "newline" else repr(tok.text))
            raise LangSyntaxError(f"expected {want}, found {got}", tok.line, tok.col, want)
        return self.take()

    def clauses(self) -> list:
        out = []
        while True:
            tok = self.peek()
            if tok.kind == "eof":
                return out
            if tok.kind == "newline":
                self.take()
                continue
            out.append(self.clause())
            end = self.peek()
            if end.kind not in ("newline", "eof"):
                raise LangSyntaxError(
                    f"expected end of line, found {end.text!r}", end.line, end.col, "one clause per line"
                )

    def clause(self) -> _Clause:
        tok = self.peek()
        if tok.kind == "punct" and tok.text == "@":
            self.take()
            name = self.expect("ident", what="directive name")
            pos = self.peek()
            term = self.term()
            return _Clause(name.text.lower(), (term,), tok.line, tok.col, True, [(pos.line, pos.col)])
        name = self.expect("ident", what="predicate or action name")
        if name.text.endswith("*"):
            raise LangSyntaxError("wildcards are only allowed in arguments", name.line, name.col, "identifier")
        self.expect("punct", "(", "'('")
        args, positions = [], []
        if not (self.peek().kind == "punct" and self.peek().text == ")"):
            while True:
                positions.append((self.peek().line, self.peek().col))
                args.append(self.term())
                if self.peek().kind == "punct" and self.peek().text == ",":
                    self.take()
                    continue
                break
        self.expect("punct", ")", "',' or ')'")
        return _Clause(name.text.lower(), tuple(args), name.line, name.col, False, positions)

    def number(self) -> float:
        tok = self.expect("number", what="number")
        return float(tok.text)

    def term(self):
        tok = self.peek()
        if tok.kind == "ident":
            self.take()
            return tok.text.lower()
        if tok.kind == "number":
            return self.number()
        if tok.kind == "string":
            self.take()
            return Text(_unescape(tok.text[1:-1], tok.line, tok.col + 1))
        if tok.kind == "punct" and tok.text == "[":
            self.take()
            xs = [self.number()]
            for _ in range(2):
                self.expect("punct", ",", "','")
                xs.append(self.number())
            self.expect("punct", "]", "']'")
            return Vec3(*xs)
        got = "end of input" if tok.kind == "eof" else ("end of line" if tok.kind == "newline" else repr(tok.text))
        raise LangSyntaxError(f"expected a term, found {got}", tok.line, tok.col, "term")


def _directive(cl: _Clause) -> Optional[str]:
    if cl.name != "scene" or len(cl.args) != 1 or not isinstance(cl.args[0], Text):
        raise LangSyntaxError(f"unknown directive @{cl.name}", cl.line, cl.col, '@scene "path"')
    return cl.args[0].value


def _signature_error(exc: LangError, cl: _Clause):
    exc.line, exc.col = cl.line, cl.col
    exc.args = (f"{cl.line}:{cl.col}: {exc.message}",)
    return exc


def parse_goals(text: str) -> GoalDocument:
    scene = None
    goals = []
    for cl in _Parser(text).clauses():
        if cl.directive:
            scene = _directive(cl)
            continue
        if cl.name not in PREDICATES:
            raise UnknownPredicate(f"unknown predicate {cl.name}", cl.line, cl.col)
        try:
            goals.append(GroundAtom(cl.name, cl.args))
        except LangError as exc:
            raise _signature_error(exc, cl) from None
    return GoalDocument(tuple(goals), scene)


def parse_plan(text: str) -> PlanDocument:
    scene = None
    steps = []
    for cl in _Parser(text).clauses():
        if cl.directive:
            scene = _directive(cl)
            continue
        if cl.name not in ACTIONS:
            raise UnknownAction(f"unknown action {cl.name}", cl.line, cl.col)
        try:
            steps.append(Call(cl.name, cl.args))
        except LangError as exc:
            raise _signature_error(exc, cl) from None
    return PlanDocument(tuple(steps), scene)


def parse_atom(text: str) -> GroundAtom:
    doc = parse_goals(text)
    if len(doc.goals) != 1:
        raise LangSyntaxError("expected exactly one atom", 1, 1, "atom")
    return doc.goals[0]


def parse_call(text: str) -> Call:
    doc = parse_plan(text)
    if len(doc.steps) != 1:
        raise LangSyntaxError("expected exactly one action", 1, 1, "action")
    return doc.steps[0]


def parse_any(text: str) -> Union[GoalDocument, PlanDocument]:
    """Parse a document whose kind is decided by its first clause name."""
    for cl in _Parser(text).clauses():
        if cl.directive:
            continue
        return parse_plan(text) if cl.name in ACTIONS and cl.name not in PREDICATES else parse_goals(text)
    return parse_goals(text)


def expand_wildcards(goals: Iterable[GroundAtom], ids: Iterable[str]) -> list:
    """Expand ``prefix*`` object arguments over matching ids; unmatched wildcards expand to nothing."""
    ids = sorted(ids)
    out = []
    for g in goals:
        expansions = [()]
        for t in g.args:
            if isinstance(t, str) and t.endswith("*"):
                prefix = t[:-1]
                matches = [i for i in ids if i.startswith(prefix)]
                expansions = [e + (m,) for e in expansions for m in matches]
            else:
                expansions = [e + (t,) for e in expansions]
        for args in expansions:
            try:
                out.append(GroundAtom(g.predicate, args))
            except LangError:
                continue
    return out
