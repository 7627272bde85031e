"""Text and JSON front ends for scores.

The text form (`.isc`) is a small block language, one keyword per tuple
field:

    score    := to
    to       := "to" name "{" field* to* relation* "}"
    field    := "dur" durexpr ";" | "policy" POLICY ";"
              | "var" NAME ("=" literal)? ";"
              | "process" NAME ("param" NAME "=" literal)* ";"
              | "point" ("start"|"end") ("wa"|"wf") ("nch"|"ch") ";"
              | "constraint" expr ";"
    relation := "relation" pointref "->" pointref ("when"|"unless") expr
                "dur" durexpr ("now"|"wait") ";"
    durexpr  := INT | "flexible" | "semirigid" INT | "rigid" INT INT
              | "random" INT INT, each optionally followed by "=" INT
                (the edition-phase nominal)
    pointref := NAME "." ("start"|"end") | "start" | "end"

Declaration order never matters; `start`/`end` without a qualifier refer
to the enclosing TO.  Names with spaces or accents are double-quoted.
The JSON form (`.isc.json`) is canonical (sorted ids, stable key order)
and carries computed dates/nominals under a separate "edition" key so
compiled and uncompiled scores share one schema.
"""

from __future__ import annotations

import json
import re
import unicodedata
from dataclasses import dataclass

from .model import (
    TRUE, And, Cmp, Condition, DateSet, Duration, DurationClass, Evaluation,
    InstancePolicy, Interpretation, Lit, Not, Or, PointRole, PointSpec, Score,
    SendBehavior, TCR, TemporalObject, Var, VarValue, WaitBehavior,
    end_point_id, start_point_id,
)


@dataclass(frozen=True)
class SourceSpan:
    file: str
    line: int
    column: int
    length: int


@dataclass(frozen=True)
class ParseError(Exception):
    span: SourceSpan
    expected: str
    found: str

    def __str__(self) -> str:
        return (f"{self.span.file}:{self.span.line}:{self.span.column}: "
                f"expected {self.expected}, found {self.found!r}")


class ScoreSyntaxError(Exception):
    """Raised by parse_text; carries every collected ParseError."""

    def __init__(self, errors: list[ParseError]):
        super().__init__("; ".join(str(e) for e in errors))
        self.errors = errors


# ---------------------------------------------------------------------------
# Lexer
# ---------------------------------------------------------------------------

_TOKEN_RE = re.compile(r"""
    (?P<ws>\s+|//[^\n]*)
  | (?P<arrow>->)
  | (?P<op><=|>=|==|!=|=|<|>)
  | (?P<punct>[{};.()])
  | (?P<int>-?\d+)
  | (?P<string>"(?:[^"\\]|\\.)*")
  | (?P<name>[^\s{};.()"=<>!]+)
""", re.VERBOSE)

KEYWORDS = {
    "to", "dur", "policy", "var", "process", "param", "point", "relation",
    "constraint", "when", "unless", "now", "wait", "flexible", "semirigid",
    "rigid", "random", "start", "end", "wa", "wf", "nch", "ch",
    "allow", "delay", "cancel", "split", "true", "false", "and", "or", "not",
}


@dataclass(frozen=True)
class Token:
    kind: str  # "name" | "int" | "string" | "op" | "punct" | "arrow" | "eof"
    text: str
    span: SourceSpan


def _lex(src: str, filename: str) -> list[Token]:
    tokens: list[Token] = []
    line, col, pos = 1, 1, 0
    while pos < len(src):
        m = _TOKEN_RE.match(src, pos)
        if m is None:
            raise ScoreSyntaxError([ParseError(
                SourceSpan(filename, line, col, 1), "a token", src[pos])])
        text = m.group(0)
        kind = m.lastgroup
        if kind != "ws":
            tokens.append(Token(kind, text, SourceSpan(filename, line, col, len(text))))
        newlines = text.count("\n")
        if newlines:
            line += newlines
            col = len(text) - text.rfind("\n")
        else:
            col += len(text)
        pos = m.end()
    tokens.append(Token("eof", "", SourceSpan(filename, line, col, 0)))
    return tokens


# ---------------------------------------------------------------------------
# Parser
# ---------------------------------------------------------------------------

class _Parser:
    def __init__(self, tokens: list[Token]):
        self.tokens = tokens
        self.pos = 0

    def peek(self) -> Token:
        return self.tokens[self.pos]

    def next(self) -> Token:
        tok = self.tokens[self.pos]
        if tok.kind != "eof":
            self.pos += 1
        return tok

    def fail(self, expected: str, tok: Token | None = None):
        tok = tok or self.peek()
        raise ScoreSyntaxError([ParseError(tok.span, expected, tok.text or "end of input")])

    def expect(self, text: str) -> Token:
        tok = self.peek()
        if tok.text != text:
            self.fail(f"'{text}'")
        return self.next()

    def at(self, text: str) -> bool:
        return self.peek().text == text

    def name(self, what: str = "a name") -> str:
        tok = self.peek()
        if tok.kind == "string":
            self.next()
            return unicodedata.normalize("NFC", _unquote(tok.text))
        if tok.kind == "name" and tok.text not in ("{", "}", ";"):
            self.next()
            return tok.text
        self.fail(what)

    def int_(self) -> int:
        tok = self.peek()
        if tok.kind != "int":
            self.fail("an integer")
        self.next()
        return int(tok.text)

    # -- grammar ------------------------------------------------------------

    def parse_score(self) -> Score:
        to = self.parse_to()
        if self.peek().kind != "eof":
            if self.at("to"):
                self.fail("end of input (a score has a single root TO)")
            self.fail("end of input")
        return _assemble(to)

    def parse_to(self) -> _RawTO:
        self.expect("to")
        name = self.name("a TO name")
        self.expect("{")
        raw = _RawTO(name)
        while not self.at("}"):
            tok = self.peek()
            if tok.kind == "eof":
                self.fail("'}'")
            if tok.text == "to":
                raw.children.append(self.parse_to())
            elif tok.text == "dur":
                self.next()
                raw.duration = self.parse_durexpr()
                self.expect(";")
            elif tok.text == "policy":
                self.next()
                word = self.name("a policy")
                try:
                    raw.policy = InstancePolicy(word)
                except ValueError:
                    self.fail("one of allow/delay/cancel/split", tok)
                self.expect(";")
            elif tok.text == "var":
                self.next()
                vname = self.name("a variable name")
                init = None
                if self.at("="):
                    self.next()
                    init = self.parse_literal()
                raw.vars[vname] = init
                self.expect(";")
            elif tok.text == "process":
                self.next()
                raw.process = self.name("a process name")
                while self.at("param"):
                    self.next()
                    pname = self.name("a parameter name")
                    self.expect("=")
                    raw.params[pname] = self.parse_literal()
                self.expect(";")
            elif tok.text == "point":
                self.next()
                role = self.name("start or end")
                if role not in ("start", "end"):
                    self.fail("start or end", tok)
                wait = self.name("wa or wf")
                if wait not in ("wa", "wf"):
                    self.fail("wa or wf", tok)
                send = self.name("nch or ch")
                if send not in ("nch", "ch"):
                    self.fail("nch or ch", tok)
                raw.points[role] = (WaitBehavior(wait), SendBehavior(send))
                self.expect(";")
            elif tok.text == "constraint":
                self.next()
                raw.constraint = self.parse_expr()
                self.expect(";")
            elif tok.text == "relation":
                raw.relations.append(self.parse_relation())
            else:
                self.fail("a field, child TO, relation, or '}'")
        self.expect("}")
        return raw

    def parse_relation(self) -> _RawRelation:
        self.expect("relation")
        p1 = self.parse_pointref()
        tok = self.peek()
        if tok.kind != "arrow":
            self.fail("'->'")
        self.next()
        p2 = self.parse_pointref()
        word = self.name("when or unless")
        if word not in ("when", "unless"):
            self.fail("when or unless")
        interp = Interpretation(word)
        cond = self.parse_expr()
        self.expect("dur")
        dur = self.parse_durexpr()
        word = self.name("now or wait")
        if word not in ("now", "wait"):
            self.fail("now or wait")
        ev = Evaluation(word)
        self.expect(";")
        return _RawRelation(p1, p2, interp, cond, dur, ev)

    def parse_pointref(self) -> tuple[str | None, str]:
        name = self.name("a point reference")
        if name in ("start", "end"):
            return (None, name)
        self.expect(".")
        role = self.name("start or end")
        if role not in ("start", "end"):
            self.fail("start or end")
        return (name, role)

    def parse_durexpr(self) -> Duration:
        tok = self.peek()
        dur: Duration
        try:
            if tok.kind == "int":
                n = self.int_()
                dur = Duration.fixed(n)
            elif tok.text == "flexible":
                self.next()
                dur = Duration.flexible()
            elif tok.text == "semirigid":
                self.next()
                dur = Duration.semi_rigid(self.int_())
            elif tok.text == "rigid":
                self.next()
                dur = Duration.rigid(self.int_(), self.int_())
            elif tok.text == "random":
                self.next()
                dur = Duration.random_between(self.int_(), self.int_())
            else:
                self.fail("a duration (INT, flexible, semirigid, rigid, random)")
            if self.at("="):
                self.next()
                dur = dur.with_nominal(self.int_())
        except ValueError as exc:
            raise ScoreSyntaxError([ParseError(tok.span, "a well-formed duration", str(exc))])
        return dur

    def parse_literal(self) -> VarValue:
        tok = self.peek()
        if tok.text == "true":
            self.next()
            return VarValue.of_bool(True)
        if tok.text == "false":
            self.next()
            return VarValue.of_bool(False)
        if tok.kind == "int":
            return VarValue.of_int(self.int_())
        self.fail("a literal (true, false, or an integer)")

    # Conditions: `or` binds loosest, then `and`, then `not`, then atoms.
    def parse_expr(self) -> Condition:
        lhs = self.parse_and()
        while self.at("or"):
            self.next()
            lhs = Or(lhs, self.parse_and())
        return lhs

    def parse_and(self) -> Condition:
        lhs = self.parse_not()
        while self.at("and"):
            self.next()
            lhs = And(lhs, self.parse_not())
        return lhs

    def parse_not(self) -> Condition:
        if self.at("not"):
            self.next()
            return Not(self.parse_not())
        return self.parse_atom()

    def parse_atom(self) -> Condition:
        tok = self.peek()
        if tok.text == "(":
            self.next()
            inner = self.parse_expr()
            self.expect(")")
            return self._maybe_cmp(inner)
        if tok.text == "true":
            self.next()
            return self._maybe_cmp(TRUE)
        if tok.text == "false":
            self.next()
            return self._maybe_cmp(Lit(VarValue.of_bool(False)))
        if tok.kind == "int":
            return self._maybe_cmp(Lit(VarValue.of_int(self.int_())))
        if tok.kind in ("name", "string"):
            return self._maybe_cmp(Var(self.name()))
        self.fail("a condition")

    def _maybe_cmp(self, lhs: Condition) -> Condition:
        tok = self.peek()
        if tok.kind == "op" and tok.text in ("==", "=", "!=", "<", "<=", ">", ">="):
            op = "==" if tok.text == "=" else tok.text
            self.next()
            rhs = self.parse_cmp_operand()
            return Cmp(op, lhs, rhs)
        return lhs

    def parse_cmp_operand(self) -> Condition:
        tok = self.peek()
        if tok.kind == "int":
            return Lit(VarValue.of_int(self.int_()))
        if tok.text in ("true", "false"):
            self.next()
            return Lit(VarValue.of_bool(tok.text == "true"))
        if tok.kind in ("name", "string"):
            return Var(self.name())
        self.fail("a comparison operand")


@dataclass
class _RawTO:
    name: str

    def __post_init__(self):
        self.duration = Duration.flexible()
        self.policy = InstancePolicy.ALLOW
        self.vars: dict[str, VarValue | None] = {}
        self.process = "silence"
        self.params: dict[str, VarValue] = {}
        self.points: dict[str, tuple[WaitBehavior, SendBehavior]] = {}
        self.constraint: Condition = TRUE
        self.children: list[_RawTO] = []
        self.relations: list[_RawRelation] = []


@dataclass
class _RawRelation:
    p1: tuple[str | None, str]
    p2: tuple[str | None, str]
    interp: Interpretation
    cond: Condition
    dur: Duration
    ev: Evaluation


def _unquote(text: str) -> str:
    body = text[1:-1]
    return re.sub(r"\\(.)", r"\1", body)


def _assemble(root: _RawTO) -> Score:
    from .model import ScoreBuilder

    b = ScoreBuilder()
    raw_rels: list[tuple[_RawTO, _RawRelation]] = []  # file order
    names_seen: set[str] = set()

    def walk(raw: _RawTO, parent: str | None):
        if raw.name in names_seen:
            raise ScoreSyntaxError([ParseError(
                SourceSpan("<score>", 1, 1, len(raw.name)),
                "a unique TO name", raw.name)])
        names_seen.add(raw.name)
        sw, ss = raw.points.get("start", (WaitBehavior.WF, SendBehavior.NCH))
        ew, es = raw.points.get("end", (WaitBehavior.WF, SendBehavior.NCH))
        b.add_to(raw.name, parent=parent, duration=raw.duration,
                 constraint=raw.constraint, process=raw.process,
                 params=dict(raw.params), vars=dict(raw.vars), policy=raw.policy,
                 start_wait=sw, start_send=ss, end_wait=ew, end_send=es)
        for rel in raw.relations:
            raw_rels.append((raw, rel))
        for child in raw.children:
            walk(child, raw.name)

    walk(root, None)

    def resolve(ref: tuple[str | None, str], scope: str) -> str:
        to_name, role = ref
        target = scope if to_name is None else to_name
        if target not in names_seen:
            raise ScoreSyntaxError([ParseError(
                SourceSpan("<score>", 1, 1, len(target)),
                "a defined TO name in a point reference", target)])
        return start_point_id(target) if role == "start" else end_point_id(target)

    for raw, rel in raw_rels:
        b.relate(resolve(rel.p1, raw.name), resolve(rel.p2, raw.name),
                 condition=rel.cond, duration=rel.dur,
                 interpretation=rel.interp, evaluation=rel.ev)
    return b.build()


def parse_text(src: str, filename: str = "<score>") -> Score:
    """Parse `.isc` text; raises ScoreSyntaxError with spans on failure."""
    parser = _Parser(_lex(src, filename))
    return parser.parse_score()


# ---------------------------------------------------------------------------
# Printer
# ---------------------------------------------------------------------------

_BARE_NAME_RE = re.compile(r"^[^\s{};.\"=<>!]+$")


def _print_name(name: str) -> str:
    if _BARE_NAME_RE.match(name) and name not in KEYWORDS and not name.lstrip("-").isdigit():
        return name
    return '"' + name.replace("\\", "\\\\").replace('"', '\\"') + '"'


def _print_literal(v: VarValue) -> str:
    if v.kind == "bool":
        return "true" if v.value else "false"
    return str(v.value)


def print_condition(c: Condition, prec: int = 0) -> str:
    # prec: 0 or, 1 and, 2 not/atom
    if isinstance(c, Lit):
        return _print_literal(c.value)
    if isinstance(c, Var):
        return _print_name(c.name)
    if isinstance(c, Cmp):
        return f"{print_condition(c.lhs, 3)} {c.op} {print_condition(c.rhs, 3)}"
    if isinstance(c, Not):
        return f"not {print_condition(c.arg, 2)}"
    if isinstance(c, And):
        # The right operand prints one level tighter so that right-nested
        # conjunctions keep their shape through a reparse (and is left-
        # associative in the grammar).
        text = f"{print_condition(c.lhs, 1)} and {print_condition(c.rhs, 2)}"
        return f"({text})" if prec > 1 else text
    if isinstance(c, Or):
        text = f"{print_condition(c.lhs, 0)} or {print_condition(c.rhs, 1)}"
        return f"({text})" if prec > 0 else text
    raise TypeError(f"not a condition node: {c!r}")


def _print_duration(d: Duration) -> str:
    if d.cls is DurationClass.FLEXIBLE:
        text = "flexible"
    elif d.cls is DurationClass.SEMI_RIGID:
        text = f"semirigid {d.min}"
    elif d.random:
        text = f"random {d.min} {d.max}"
    elif d.min == d.max:
        text = str(d.min)
    else:
        text = f"rigid {d.min} {d.max}"
    if d.nominal is not None:
        text += f" ={d.nominal}"
    return text


def _print_pointref(pid: str, scope: str) -> str:
    to_name, _, role = pid.rpartition(".")
    if to_name == scope:
        return role
    return f"{_print_name(to_name)}.{role}"


def print_text(score: Score) -> str:
    """Render a score back to `.isc` text; parse_text inverts it."""
    lines: list[str] = []

    # Relations print inside the block of their source point's owner.
    by_owner: dict[str, list[TCR]] = {}
    for rid in sorted(score.relations, key=_rel_sort_key):
        r = score.relations[rid]
        owner = score.points[r.p1].owner if r.p1 in score.points else score.root
        by_owner.setdefault(owner, []).append(r)

    def emit(to_id: str, indent: int):
        t = score.temporal_objects[to_id]
        pad = "  " * indent
        lines.append(f"{pad}to {_print_name(t.id)} {{")
        body = "  " * (indent + 1)
        lines.append(f"{body}dur {_print_duration(t.duration)};")
        if t.instance_policy is not InstancePolicy.ALLOW:
            lines.append(f"{body}policy {t.instance_policy.value};")
        for vname in t.vars:
            init = t.vars[vname]
            if init is None:
                lines.append(f"{body}var {_print_name(vname)};")
            else:
                lines.append(f"{body}var {_print_name(vname)} = {_print_literal(init)};")
        params = "".join(f" param {_print_name(k)} = {_print_literal(v)}"
                         for k, v in t.params.items())
        lines.append(f"{body}process {_print_name(t.process)}{params};")
        for role, pid in (("start", t.start), ("end", t.end)):
            p = score.points[pid]
            if p.wait is not WaitBehavior.WF or p.send is not SendBehavior.NCH:
                lines.append(f"{body}point {role} {p.wait.value} {p.send.value};")
        if t.constraint != TRUE:
            lines.append(f"{body}constraint {print_condition(t.constraint)};")
        for child in t.children:
            emit(child, indent + 1)
        for r in by_owner.get(to_id, []):
            lines.append(
                f"{body}relation {_print_pointref(r.p1, to_id)} -> "
                f"{_print_pointref(r.p2, to_id)} {r.interpretation.value} "
                f"{print_condition(r.condition)} dur {_print_duration(r.duration)} "
                f"{r.evaluation.value};")
        lines.append(f"{pad}}}")

    emit(score.root, 0)
    return "\n".join(lines) + "\n"


def _rel_sort_key(rid: str):
    m = re.fullmatch(r"r(\d+)", rid)
    return (0, int(m.group(1)), rid) if m else (1, 0, rid)


# ---------------------------------------------------------------------------
# JSON form
# ---------------------------------------------------------------------------

class SchemaError(Exception):
    def __init__(self, path: str, message: str):
        super().__init__(f"{path}: {message}")
        self.path = path


def _cond_to_json(c: Condition):
    if isinstance(c, Lit):
        return {"lit": _value_to_json(c.value)}
    if isinstance(c, Var):
        return {"var": c.name}
    if isinstance(c, Cmp):
        return {"cmp": c.op, "lhs": _cond_to_json(c.lhs), "rhs": _cond_to_json(c.rhs)}
    if isinstance(c, And):
        return {"and": [_cond_to_json(c.lhs), _cond_to_json(c.rhs)]}
    if isinstance(c, Or):
        return {"or": [_cond_to_json(c.lhs), _cond_to_json(c.rhs)]}
    if isinstance(c, Not):
        return {"not": _cond_to_json(c.arg)}
    raise TypeError(f"not a condition node: {c!r}")


def _cond_from_json(doc, path: str) -> Condition:
    if not isinstance(doc, dict) or len(doc) < 1:
        raise SchemaError(path, "expected a condition object")
    if "lit" in doc:
        return Lit(_value_from_json(doc["lit"], path + "/lit"))
    if "var" in doc:
        if not isinstance(doc["var"], str):
            raise SchemaError(path + "/var", "expected a string")
        return Var(doc["var"])
    if "cmp" in doc:
        if doc["cmp"] not in ("==", "!=", "<", "<=", ">", ">="):
            raise SchemaError(path + "/cmp", f"unknown operator {doc['cmp']!r}")
        return Cmp(doc["cmp"], _cond_from_json(doc["lhs"], path + "/lhs"),
                   _cond_from_json(doc["rhs"], path + "/rhs"))
    if "and" in doc:
        return And(_cond_from_json(doc["and"][0], path + "/and/0"),
                   _cond_from_json(doc["and"][1], path + "/and/1"))
    if "or" in doc:
        return Or(_cond_from_json(doc["or"][0], path + "/or/0"),
                  _cond_from_json(doc["or"][1], path + "/or/1"))
    if "not" in doc:
        return Not(_cond_from_json(doc["not"], path + "/not"))
    raise SchemaError(path, f"unknown condition shape {sorted(doc)!r}")


def _value_to_json(v: VarValue):
    if v.kind == "unknown":
        return None
    return bool(v.value) if v.kind == "bool" else int(v.value)


def _value_from_json(doc, path: str) -> VarValue:
    if doc is None:
        from .model import UNKNOWN
        return UNKNOWN
    if isinstance(doc, bool):
        return VarValue.of_bool(doc)
    if isinstance(doc, int):
        return VarValue.of_int(doc)
    raise SchemaError(path, f"expected bool, int, or null, got {type(doc).__name__}")


def _duration_to_json(d: Duration):
    doc = {"class": d.cls.value, "min": d.min}
    if d.cls is DurationClass.RIGID:
        doc["max"] = d.max
    if d.random:
        doc["random"] = True
    if d.nominal is not None:
        doc["nominal"] = d.nominal
    return doc


def _duration_from_json(doc, path: str) -> Duration:
    if not isinstance(doc, dict) or "class" not in doc:
        raise SchemaError(path, "expected a duration object with a class")
    try:
        cls = DurationClass(doc["class"])
        return Duration(cls, doc.get("min", 0),
                        doc.get("max") if cls is DurationClass.RIGID else None,
                        doc.get("nominal"), doc.get("random", False))
    except ValueError as exc:
        raise SchemaError(path, str(exc))


def _dateset_to_json(ds: DateSet):
    if ds.kind == "progression":
        return {"kind": "progression", "offset": ds.offset, "period": ds.period}
    if ds.kind == "at_least":
        return {"kind": "at_least", "min": ds.offset}
    if ds.kind == "exact":
        return {"kind": "exact", "values": sorted(ds.values)}
    return {"kind": ds.kind}


def _dateset_from_json(doc, path: str) -> DateSet:
    if not isinstance(doc, dict) or "kind" not in doc:
        raise SchemaError(path, "expected a date-set object")
    kind = doc["kind"]
    if kind == "progression":
        return DateSet.progression(doc["offset"], doc["period"])
    if kind == "at_least":
        return DateSet.at_least(doc["min"])
    if kind == "exact":
        return DateSet.exact(doc["values"])
    if kind == "any":
        return DateSet.any()
    if kind == "unknown":
        return DateSet.unknown()
    raise SchemaError(path + "/kind", f"unknown date-set kind {kind!r}")


def to_json(score: Score) -> dict:
    """Canonical JSON document: sorted ids, stable key order."""
    tos = []
    for to_id in sorted(score.temporal_objects):
        t = score.temporal_objects[to_id]
        tos.append({
            "id": t.id, "name": t.name, "start": t.start, "end": t.end,
            "duration": _duration_to_json(t.duration),
            "constraint": _cond_to_json(t.constraint),
            "process": t.process,
            "params": {k: _value_to_json(v) for k, v in sorted(t.params.items())},
            "children": list(t.children),
            "vars": {k: (None if v is None else _value_to_json(v))
                     for k, v in sorted(t.vars.items())},
            "instance_policy": t.instance_policy.value,
            "points": {
                p.role.value: {"wait": p.wait.value, "send": p.send.value}
                for p in (score.points[t.start], score.points[t.end])
            },
        })
    rels = []
    for rid in sorted(score.relations, key=_rel_sort_key):
        r = score.relations[rid]
        rels.append({
            "id": r.id, "p1": r.p1, "p2": r.p2,
            "condition": _cond_to_json(r.condition),
            "duration": _duration_to_json(r.duration),
            "interpretation": r.interpretation.value,
            "evaluation": r.evaluation.value,
        })
    doc = {"format": "iscore", "version": 1, "root": score.root,
           "temporal_objects": tos, "relations": rels}
    dates = {p.id: _dateset_to_json(p.dates)
             for p in score.points.values() if p.dates.kind != "unknown"}
    if dates:
        doc["edition"] = {"dates": {k: dates[k] for k in sorted(dates)}}
    return doc


def from_json(doc) -> Score:
    """Inverse of to_json; raises SchemaError naming the offending path."""
    if not isinstance(doc, dict):
        raise SchemaError("/", "expected a JSON object")
    if doc.get("format") != "iscore":
        raise SchemaError("/format", "expected 'iscore'")
    for key in ("root", "temporal_objects", "relations"):
        if key not in doc:
            raise SchemaError(f"/{key}", "missing required key")

    tos: dict[str, TemporalObject] = {}
    points: dict[str, PointSpec] = {}
    for i, tdoc in enumerate(doc["temporal_objects"]):
        path = f"/temporal_objects/{i}"
        for key in ("id", "start", "end", "duration"):
            if key not in tdoc:
                raise SchemaError(f"{path}/{key}", "missing required key")
        tid = tdoc["id"]
        if tid in tos:
            raise SchemaError(f"{path}/id", f"duplicate TO id {tid!r}")
        try:
            policy = InstancePolicy(tdoc.get("instance_policy", "allow"))
        except ValueError:
            raise SchemaError(f"{path}/instance_policy",
                              f"unknown policy {tdoc.get('instance_policy')!r}")
        pts = tdoc.get("points", {})
        for role, pid in (("start", tdoc["start"]), ("end", tdoc["end"])):
            pdoc = pts.get(role, {})
            try:
                wait = WaitBehavior(pdoc.get("wait", "wf"))
                send = SendBehavior(pdoc.get("send", "nch"))
            except ValueError as exc:
                raise SchemaError(f"{path}/points/{role}", str(exc))
            points[pid] = PointSpec(pid, tid, PointRole(role), wait, send)
        tos[tid] = TemporalObject(
            id=tid, name=tdoc.get("name", tid), start=tdoc["start"], end=tdoc["end"],
            duration=_duration_from_json(tdoc["duration"], f"{path}/duration"),
            constraint=_cond_from_json(tdoc.get("constraint", {"lit": True}),
                                       f"{path}/constraint"),
            process=tdoc.get("process", "silence"),
            params={k: _value_from_json(v, f"{path}/params/{k}")
                    for k, v in tdoc.get("params", {}).items()},
            children=tuple(tdoc.get("children", [])),
            vars={k: (None if v is None else _value_from_json(v, f"{path}/vars/{k}"))
                  for k, v in tdoc.get("vars", {}).items()},
            instance_policy=policy)

    relations: dict[str, TCR] = {}
    for i, rdoc in enumerate(doc["relations"]):
        path = f"/relations/{i}"
        for key in ("id", "p1", "p2"):
            if key not in rdoc:
                raise SchemaError(f"{path}/{key}", "missing required key")
        rid = rdoc["id"]
        if rid in relations:
            raise SchemaError(f"{path}/id", f"duplicate relation id {rid!r}")
        for key in ("p1", "p2"):
            if rdoc[key] not in points:
                raise SchemaError(f"{path}/{key}", f"unknown point {rdoc[key]!r}")
        try:
            interp = Interpretation(rdoc.get("interpretation", "when"))
            ev = Evaluation(rdoc.get("evaluation", "wait"))
        except ValueError as exc:
            raise SchemaError(path, str(exc))
        relations[rid] = TCR(
            rid, rdoc["p1"], rdoc["p2"],
            _cond_from_json(rdoc.get("condition", {"lit": True}), f"{path}/condition"),
            _duration_from_json(rdoc.get("duration", {"class": "rigid", "min": 0, "max": 0}),
                                f"{path}/duration"),
            interp, ev)

    if doc["root"] not in tos:
        raise SchemaError("/root", f"root {doc['root']!r} is not a defined TO")

    edition = doc.get("edition")
    if edition:
        for pid, dsdoc in edition.get("dates", {}).items():
            if pid not in points:
                raise SchemaError(f"/edition/dates/{pid}", "unknown point")
            p = points[pid]
            points[pid] = PointSpec(p.id, p.owner, p.role, p.wait, p.send,
                                    _dateset_from_json(dsdoc, f"/edition/dates/{pid}"))

    return Score(root=doc["root"], temporal_objects=tos, points=points,
                 relations=relations)


def dumps(score: Score, indent: int | None = 2) -> str:
    return json.dumps(to_json(score), indent=indent, ensure_ascii=False)


def loads(text: str) -> Score:
    return from_json(json.loads(text))
