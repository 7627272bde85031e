"""Domain model for interactive scores with timed conditional branching.

A score is a tree of temporal objects (TOs).  Every TO owns a start point
and an end point; points are wired together by timed conditional relations
(TCRs), which are durated "before" edges guarded by a condition.  This
module holds the declarative side only: the types, three-valued condition
evaluation, date-set membership, and the structural validator.  Static
analysis lives in `edition`, execution in `engine`.

Times are unsigned integer ticks (one tick is one second in all shipped
scores; wall pacing is the server's concern).
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from enum import Enum


Ticks = int


# ---------------------------------------------------------------------------
# Variable values and three-valued logic
# ---------------------------------------------------------------------------

class Tri(Enum):
    """Result of evaluating a condition: strong Kleene three-valued logic."""

    TRUE = "true"
    FALSE = "false"
    UNKNOWN = "unknown"


@dataclass(frozen=True)
class VarValue:
    """A variable binding: a boolean, an integer, or the undeduced value.

    Unknown is distinct from every boolean and every integer; it is what an
    unbound name resolves to and what comparisons involving it produce.
    """

    kind: str  # "bool" | "int" | "unknown"
    value: bool | int | None = None

    @staticmethod
    def of_bool(b: bool) -> VarValue:
        return VarValue("bool", bool(b))

    @staticmethod
    def of_int(n: int) -> VarValue:
        return VarValue("int", int(n))

    @staticmethod
    def from_json(doc) -> VarValue:
        if doc is None:
            return UNKNOWN
        if isinstance(doc, bool):
            return VarValue.of_bool(doc)
        if isinstance(doc, int):
            return VarValue.of_int(doc)
        raise ValueError(f"expected bool, int, or null, got {type(doc).__name__}")

    def to_json(self):
        if self.kind == "unknown":
            return None
        return bool(self.value) if self.kind == "bool" else int(self.value)

    def __repr__(self) -> str:
        if self.kind == "unknown":
            return "Unknown"
        return f"{self.kind.capitalize()}({self.value})"


UNKNOWN = VarValue("unknown")
VTRUE = VarValue.of_bool(True)
VFALSE = VarValue.of_bool(False)


class VarEnv:
    """A chain of variable scopes mirroring the TO containment chain.

    Lookup resolves in the owner's own bindings first, then walks parents;
    an unbound name resolves to Unknown.
    """

    __slots__ = ("owner", "bindings", "parent")

    def __init__(self, owner: str, bindings: dict[str, VarValue] | None = None,
                 parent: VarEnv | None = None):
        self.owner = owner
        self.bindings: dict[str, VarValue] = dict(bindings or {})
        self.parent = parent

    def lookup(self, name: str) -> VarValue:
        env: VarEnv | None = self
        while env is not None:
            if name in env.bindings:
                return env.bindings[name]
            env = env.parent
        return UNKNOWN

    def set(self, name: str, value: VarValue) -> None:
        self.bindings[name] = value

    def copy(self, parent: VarEnv | None = None) -> VarEnv:
        return VarEnv(self.owner, dict(self.bindings), parent)


# ---------------------------------------------------------------------------
# Conditions
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Condition:
    """Base class for condition expression nodes."""


@dataclass(frozen=True)
class Lit(Condition):
    value: VarValue


@dataclass(frozen=True)
class Var(Condition):
    name: str


@dataclass(frozen=True)
class Cmp(Condition):
    op: str  # "==" "!=" "<" "<=" ">" ">="
    lhs: Condition
    rhs: Condition


@dataclass(frozen=True)
class And(Condition):
    lhs: Condition
    rhs: Condition


@dataclass(frozen=True)
class Or(Condition):
    lhs: Condition
    rhs: Condition


@dataclass(frozen=True)
class Not(Condition):
    arg: Condition


TRUE = Lit(VTRUE)
FALSE = Lit(VFALSE)

_CMP_OPS = {"==", "!=", "<", "<=", ">", ">="}


def _tri_of(b: bool) -> Tri:
    return Tri.TRUE if b else Tri.FALSE


def _eval_value(c: Condition, env: VarEnv) -> VarValue:
    """Evaluate a condition node to a VarValue (for comparison operands)."""
    if isinstance(c, Lit):
        return c.value
    if isinstance(c, Var):
        return env.lookup(c.name)
    # A boolean subtree used as a comparison operand.
    t = eval_condition(c, env)
    if t is Tri.UNKNOWN:
        return UNKNOWN
    return VTRUE if t is Tri.TRUE else VFALSE


def eval_condition(c: Condition, env: VarEnv) -> Tri:
    """Strong Kleene evaluation; total on every (condition, env) pair."""
    if isinstance(c, Lit):
        if c.value.kind == "bool":
            return _tri_of(bool(c.value.value))
        return Tri.UNKNOWN  # an integer has no truth value
    if isinstance(c, Var):
        v = env.lookup(c.name)
        if v.kind == "bool":
            return _tri_of(bool(v.value))
        return Tri.UNKNOWN
    if isinstance(c, Not):
        t = eval_condition(c.arg, env)
        if t is Tri.UNKNOWN:
            return Tri.UNKNOWN
        return Tri.FALSE if t is Tri.TRUE else Tri.TRUE
    if isinstance(c, And):
        a = eval_condition(c.lhs, env)
        b = eval_condition(c.rhs, env)
        if a is Tri.FALSE or b is Tri.FALSE:
            return Tri.FALSE
        if a is Tri.TRUE and b is Tri.TRUE:
            return Tri.TRUE
        return Tri.UNKNOWN
    if isinstance(c, Or):
        a = eval_condition(c.lhs, env)
        b = eval_condition(c.rhs, env)
        if a is Tri.TRUE or b is Tri.TRUE:
            return Tri.TRUE
        if a is Tri.FALSE and b is Tri.FALSE:
            return Tri.FALSE
        return Tri.UNKNOWN
    if isinstance(c, Cmp):
        lv = _eval_value(c.lhs, env)
        rv = _eval_value(c.rhs, env)
        if lv.kind == "unknown" or rv.kind == "unknown":
            return Tri.UNKNOWN
        if c.op in ("==", "!="):
            if lv.kind != rv.kind:
                return Tri.UNKNOWN
            eq = lv.value == rv.value
            return _tri_of(eq if c.op == "==" else not eq)
        if lv.kind != "int" or rv.kind != "int":
            return Tri.UNKNOWN  # ordering is only defined on integers
        a, b = lv.value, rv.value
        if c.op == "<":
            return _tri_of(a < b)
        if c.op == "<=":
            return _tri_of(a <= b)
        if c.op == ">":
            return _tri_of(a > b)
        return _tri_of(a >= b)
    raise TypeError(f"not a condition node: {c!r}")


# ---------------------------------------------------------------------------
# Durations and date sets
# ---------------------------------------------------------------------------

class DurationClass(str, Enum):
    FLEXIBLE = "flexible"
    SEMI_RIGID = "semirigid"
    RIGID = "rigid"


@dataclass(frozen=True)
class Duration:
    """A duration class plus the nominal value the edition phase fills in.

    `random` marks a bounded duration that is sampled (uniformly in
    [min, max]) each time the engine arms it, instead of running at the
    nominal.  Only bounded (rigid-class) durations may be random.
    """

    cls: DurationClass
    min: Ticks = 0
    max: Ticks | None = None
    nominal: Ticks | None = None
    random: bool = False

    def __post_init__(self):
        if self.min < 0:
            raise ValueError("duration min must be >= 0")
        if self.cls is DurationClass.RIGID:
            if self.max is None or self.max < self.min:
                raise ValueError(f"rigid duration needs min <= max, got [{self.min}, {self.max}]")
            if self.nominal is not None and not (self.min <= self.nominal <= self.max):
                raise ValueError("rigid nominal outside [min, max]")
        elif self.cls is DurationClass.SEMI_RIGID:
            if self.nominal is not None and self.nominal < self.min:
                raise ValueError("semirigid nominal below min")
            if self.random:
                raise ValueError("random duration must be bounded")
        else:
            if self.random:
                raise ValueError("random duration must be bounded")

    @staticmethod
    def flexible(nominal: Ticks | None = None) -> Duration:
        return Duration(DurationClass.FLEXIBLE, 0, None, nominal)

    @staticmethod
    def semi_rigid(min: Ticks, nominal: Ticks | None = None) -> Duration:
        return Duration(DurationClass.SEMI_RIGID, min, None, nominal)

    @staticmethod
    def rigid(min: Ticks, max: Ticks, nominal: Ticks | None = None) -> Duration:
        return Duration(DurationClass.RIGID, min, max, nominal)

    @staticmethod
    def fixed(n: Ticks) -> Duration:
        return Duration(DurationClass.RIGID, n, n)

    @staticmethod
    def random_between(lo: Ticks, hi: Ticks) -> Duration:
        return Duration(DurationClass.RIGID, lo, hi, None, random=True)

    @property
    def lower(self) -> Ticks:
        return self.min

    @property
    def upper(self) -> Ticks | None:
        return self.max if self.cls is DurationClass.RIGID else None

    def with_nominal(self, n: Ticks) -> Duration:
        return replace(self, nominal=n)


@dataclass(frozen=True)
class DateSet:
    """The set of logical ticks at which a point may execute.

    Variants: Progression{offset, period} (all d >= offset with
    (d - offset) % period == 0), AtLeast{min}, Exact{values}, Any, Unknown.
    A progression with period 0 collapses to Exact{{offset}}.
    """

    kind: str  # "progression" | "at_least" | "exact" | "any" | "unknown"
    offset: Ticks = 0
    period: Ticks = 0
    values: frozenset[Ticks] = frozenset()

    @staticmethod
    def progression(offset: Ticks, period: Ticks) -> DateSet:
        if period == 0:
            return DateSet.exact([offset])
        if period < 0:
            raise ValueError("period must be >= 0")
        return DateSet("progression", offset=offset, period=period)

    @staticmethod
    def at_least(min: Ticks) -> DateSet:
        return DateSet("at_least", offset=min)

    @staticmethod
    def exact(values) -> DateSet:
        return DateSet("exact", values=frozenset(int(v) for v in values))

    @staticmethod
    def any() -> DateSet:
        return DateSet("any")

    @staticmethod
    def unknown() -> DateSet:
        return DateSet("unknown")

    def contains(self, t: Ticks) -> bool:
        if t < 0:
            raise ValueError("ticks are unsigned")
        if self.kind == "progression":
            return t >= self.offset and (t - self.offset) % self.period == 0
        if self.kind == "at_least":
            return t >= self.offset
        if self.kind == "exact":
            return t in self.values
        return True  # any / unknown: membership cannot be excluded

    def __repr__(self) -> str:
        if self.kind == "progression":
            return f"Progression{{{self.offset},{self.period}}}"
        if self.kind == "at_least":
            return f"AtLeast{{{self.offset}}}"
        if self.kind == "exact":
            return "Exact{" + ",".join(str(v) for v in sorted(self.values)) + "}"
        return self.kind.capitalize()


def dateset_contains(ds: DateSet, t: Ticks) -> bool:
    return ds.contains(t)


# ---------------------------------------------------------------------------
# Points, relations, temporal objects, scores
# ---------------------------------------------------------------------------

class WaitBehavior(str, Enum):
    WA = "wa"  # wait for all predecessors
    WF = "wf"  # wait for the first


class SendBehavior(str, Enum):
    NCH = "nch"  # transfer to all enabled successors
    CH = "ch"    # choose one enabled successor


class PointRole(str, Enum):
    START = "start"
    END = "end"


class Interpretation(str, Enum):
    WHEN = "when"      # jump if the condition holds
    UNLESS = "unless"  # jump if it fails or cannot be deduced


class Evaluation(str, Enum):
    NOW = "now"    # fire as soon as the condition holds
    WAIT = "wait"  # evaluate once, at the end of the relation's duration


class InstancePolicy(str, Enum):
    ALLOW = "allow"
    DELAY = "delay"
    CANCEL = "cancel"
    SPLIT = "split"


@dataclass(frozen=True)
class PointSpec:
    id: str
    owner: str
    role: PointRole
    wait: WaitBehavior = WaitBehavior.WF
    send: SendBehavior = SendBehavior.NCH
    dates: DateSet = field(default_factory=DateSet.unknown)


@dataclass(frozen=True)
class TimedConditionalRelation:
    id: str
    p1: str
    p2: str
    condition: Condition = TRUE
    duration: Duration = field(default_factory=lambda: Duration.fixed(0))
    interpretation: Interpretation = Interpretation.WHEN
    evaluation: Evaluation = Evaluation.WAIT


TCR = TimedConditionalRelation


@dataclass(frozen=True)
class TemporalObject:
    id: str
    name: str
    start: str
    end: str
    duration: Duration
    constraint: Condition = TRUE
    process: str = "silence"
    params: dict = field(default_factory=dict)
    children: tuple[str, ...] = ()
    vars: dict = field(default_factory=dict)  # name -> VarValue | None (uninitialized)
    instance_policy: InstancePolicy = InstancePolicy.ALLOW


@dataclass(frozen=True)
class Score:
    root: str
    temporal_objects: dict = field(default_factory=dict)  # id -> TemporalObject
    points: dict = field(default_factory=dict)            # id -> PointSpec
    relations: dict = field(default_factory=dict)         # id -> TCR

    def to(self, to_id: str) -> TemporalObject:
        return self.temporal_objects[to_id]

    def point(self, pid: str) -> PointSpec:
        return self.points[pid]

    def parent_of(self, to_id: str) -> str | None:
        for t in self.temporal_objects.values():
            if to_id in t.children:
                return t.id
        return None

    def outgoing(self, pid: str) -> list[TCR]:
        return [r for r in self.relations.values() if r.p1 == pid]

    def incoming(self, pid: str) -> list[TCR]:
        return [r for r in self.relations.values() if r.p2 == pid]

    def is_compiled(self) -> bool:
        durs = [t.duration for t in self.temporal_objects.values()]
        durs += [r.duration for r in self.relations.values()]
        return all(d.nominal is not None for d in durs)


def start_point_id(to_id: str) -> str:
    return f"{to_id}.start"


def end_point_id(to_id: str) -> str:
    return f"{to_id}.end"


# ---------------------------------------------------------------------------
# Jump enabling
# ---------------------------------------------------------------------------

def jump_enabled(r: TCR, env: VarEnv) -> bool:
    """Whether control jumps across `r` given the source environment.

    `when` jumps iff the condition holds; `unless` jumps iff it fails or
    cannot be deduced.  For any condition exactly one of the two
    interpretations is enabled.
    """
    t = eval_condition(r.condition, env)
    if r.interpretation is Interpretation.WHEN:
        return t is Tri.TRUE
    return t in (Tri.FALSE, Tri.UNKNOWN)


# ---------------------------------------------------------------------------
# Process stubs
# ---------------------------------------------------------------------------

class ProcessRegistry:
    """Registry of process stub names; stubs only show up in the trace."""

    def __init__(self, names=()):
        self._names = set(names)

    def register(self, name: str) -> None:
        self._names.add(name)

    def knows(self, name: str) -> bool:
        return name in self._names

    def copy(self) -> ProcessRegistry:
        return ProcessRegistry(self._names)


#: Stubs every shipped score refers to.
DEFAULT_PROCESSES = ProcessRegistry({
    "silence", "log",
    "playSoundB", "playVideoC",
    "seqGeste", "seqPaysage", "seqSens", "cycleStep", "bugAlarm",
    "playT1", "playT2", "playT4", "playT5",
})


# ---------------------------------------------------------------------------
# Validation
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Diagnostic:
    severity: str  # "error" | "warning"
    code: str
    subject: str
    message: str

    def __str__(self) -> str:
        return f"{self.severity}[{self.code}] {self.subject}: {self.message}"


def _reachable_points(score: Score, start: str) -> set[str]:
    seen = {start}
    frontier = [start]
    while frontier:
        p = frontier.pop()
        for r in score.relations.values():
            if r.p1 == p and r.p2 in score.points and r.p2 not in seen:
                seen.add(r.p2)
                frontier.append(r.p2)
    return seen


def _condition_vars(c: Condition) -> set[str]:
    if isinstance(c, Var):
        return {c.name}
    if isinstance(c, (And, Or)):
        return _condition_vars(c.lhs) | _condition_vars(c.rhs)
    if isinstance(c, Cmp):
        return _condition_vars(c.lhs) | _condition_vars(c.rhs)
    if isinstance(c, Not):
        return _condition_vars(c.arg)
    return set()


def _scope_vars(score: Score, to_id: str | None) -> set[str]:
    names: set[str] = set()
    while to_id is not None:
        names |= set(score.temporal_objects[to_id].vars)
        to_id = score.parent_of(to_id)
    return names


def validate_score(score: Score, processes: ProcessRegistry | None = None) -> list[Diagnostic]:
    """Collect all structural violations; deterministic, order-independent."""
    processes = processes if processes is not None else DEFAULT_PROCESSES
    out: list[Diagnostic] = []

    def err(code, subject, message):
        out.append(Diagnostic("error", code, subject, message))

    def warn(code, subject, message):
        out.append(Diagnostic("warning", code, subject, message))

    tos = score.temporal_objects

    # Root and containment tree.
    if score.root not in tos:
        err("NO_ROOT", score.root, "root temporal object is not defined")
        return sorted(out, key=lambda d: (d.severity, d.code, d.subject))
    parents: dict[str, str] = {}
    for t in tos.values():
        for c in t.children:
            if c not in tos:
                err("UNDEFINED_CHILD", t.id, f"child {c!r} is not defined")
            elif c in parents:
                err("TWO_PARENTS", c, f"contained in both {parents[c]!r} and {t.id!r}")
            else:
                parents[c] = t.id
    if score.root in parents:
        err("ROOT_CONTAINED", score.root, "root may not be a child")
    for t in tos.values():
        seen = set()
        cur: str | None = t.id
        while cur is not None:
            if cur in seen:
                err("CONTAINMENT_CYCLE", t.id, "containment chain loops")
                break
            seen.add(cur)
            cur = parents.get(cur)

    # Point ownership: each point belongs to exactly one TO.
    owners: dict[str, list[str]] = {}
    for t in tos.values():
        for pid in (t.start, t.end):
            owners.setdefault(pid, []).append(t.id)
    for pid, owning in sorted(owners.items()):
        if len(owning) > 1:
            err("DUP_POINT_OWNER", pid, f"owned by {', '.join(sorted(owning))}")
        if pid not in score.points:
            err("UNDEFINED_POINT", pid, "point referenced by a TO but not defined")
    for p in score.points.values():
        if p.owner not in tos:
            err("ORPHAN_POINT", p.id, f"owner {p.owner!r} is not a TO")

    # Relations.
    for r in sorted(score.relations.values(), key=lambda r: r.id):
        for endpoint in (r.p1, r.p2):
            if endpoint not in score.points:
                err("DANGLING_ENDPOINT", r.id, f"references undefined point {endpoint!r}")
        if r.duration.cls is not DurationClass.FLEXIBLE and r.evaluation is Evaluation.NOW:
            err("NONFLEX_NOW", r.id,
                "only flexible durations may evaluate now; use wait")

    # Hierarchy wiring rules.
    root_start = tos[score.root].start
    reachable = _reachable_points(score, root_start) if root_start in score.points else set()
    for t in sorted(tos.values(), key=lambda t: t.id):
        if t.children:
            linked = any(
                r.p1 == t.start and any(r.p2 == tos[c].start for c in t.children if c in tos)
                for r in score.relations.values())
            if not linked:
                err("MISSING_CHILD_START_LINK", t.id,
                    "no relation from this TO's start to any child's start")
        direct = any(r.p1 == t.start and r.p2 == t.end for r in score.relations.values())
        if not direct:
            if t.end in reachable:
                warn("MISSING_DIRECT_END_LINK", t.id,
                     "no direct start-to-end relation; end is reachable through other relations")
            else:
                err("MISSING_DIRECT_END_LINK", t.id,
                    "no direct start-to-end relation and the end point is unreachable")

    # Processes.
    for t in sorted(tos.values(), key=lambda t: t.id):
        if not processes.knows(t.process):
            warn("UNREGISTERED_PROCESS", t.id, f"process {t.process!r} is not registered")

    # Variables referenced by conditions must be declared in the lexical chain.
    for r in sorted(score.relations.values(), key=lambda r: r.id):
        if r.p1 not in score.points:
            continue
        scope = _scope_vars(score, score.points[r.p1].owner)
        for name in sorted(_condition_vars(r.condition) - scope):
            warn("UNKNOWN_VAR", r.id, f"condition references undeclared variable {name!r}")
    for t in sorted(tos.values(), key=lambda t: t.id):
        scope = _scope_vars(score, t.id)
        for name in sorted(_condition_vars(t.constraint) - scope):
            warn("UNKNOWN_VAR", t.id, f"constraint references undeclared variable {name!r}")

    return sorted(out, key=lambda d: (d.severity, d.code, d.subject, d.message))


def has_errors(diags: list[Diagnostic]) -> bool:
    return any(d.severity == "error" for d in diags)


# ---------------------------------------------------------------------------
# Construction helper
# ---------------------------------------------------------------------------

class ScoreBuilder:
    """Incremental score construction.

    Auto-generated relation ids are canonicalized at build time: grouped
    by the source point's owner, owners in depth-first TO order, insertion
    order within a group.  The text printer emits relations in that same
    grouping, which is what makes parse/print a structural identity on any
    auto-id score.  Explicitly-named relations keep their ids.
    """

    def __init__(self):
        self._tos: dict[str, dict] = {}
        self._points: dict[str, PointSpec] = {}
        self._relations: dict[str, TCR] = {}
        self._root: str | None = None
        self._rel_count = 0
        self._explicit_ids = False

    def add_to(self, to_id: str, *, name: str | None = None, parent: str | None = None,
               duration: Duration | None = None, constraint: Condition = TRUE,
               process: str = "silence", params: dict | None = None,
               vars: dict | None = None, policy: InstancePolicy = InstancePolicy.ALLOW,
               start_wait: WaitBehavior = WaitBehavior.WF,
               start_send: SendBehavior = SendBehavior.NCH,
               end_wait: WaitBehavior = WaitBehavior.WF,
               end_send: SendBehavior = SendBehavior.NCH) -> str:
        if to_id in self._tos:
            raise ValueError(f"duplicate TO id {to_id!r}")
        sp, ep = start_point_id(to_id), end_point_id(to_id)
        self._points[sp] = PointSpec(sp, to_id, PointRole.START, start_wait, start_send)
        self._points[ep] = PointSpec(ep, to_id, PointRole.END, end_wait, end_send)
        self._tos[to_id] = {
            "name": name if name is not None else to_id,
            "duration": duration if duration is not None else Duration.flexible(),
            "constraint": constraint, "process": process,
            "params": dict(params or {}), "vars": dict(vars or {}),
            "policy": policy, "children": [], "parent": parent,
        }
        if parent is None:
            if self._root is not None:
                raise ValueError("score already has a root TO")
            self._root = to_id
        else:
            self._tos[parent]["children"].append(to_id)
        return to_id

    def relate(self, p1: str, p2: str, *, condition: Condition = TRUE,
               duration: Duration | None = None,
               interpretation: Interpretation = Interpretation.WHEN,
               evaluation: Evaluation = Evaluation.WAIT,
               rel_id: str | None = None) -> str:
        if rel_id is None:
            self._rel_count += 1
            rel_id = f"r{self._rel_count}"
        else:
            self._explicit_ids = True
        if rel_id in self._relations:
            raise ValueError(f"duplicate relation id {rel_id!r}")
        self._relations[rel_id] = TCR(
            rel_id, p1, p2, condition,
            duration if duration is not None else Duration.fixed(0),
            interpretation, evaluation)
        return rel_id

    def build(self) -> Score:
        if self._root is None:
            raise ValueError("score has no root TO")
        tos = {}
        for to_id, spec in self._tos.items():
            tos[to_id] = TemporalObject(
                id=to_id, name=spec["name"],
                start=start_point_id(to_id), end=end_point_id(to_id),
                duration=spec["duration"], constraint=spec["constraint"],
                process=spec["process"], params=spec["params"],
                children=tuple(spec["children"]), vars=spec["vars"],
                instance_policy=spec["policy"])
        relations = dict(self._relations)
        if not self._explicit_ids:
            df_order: list[str] = []

            def walk(to_id: str):
                df_order.append(to_id)
                for child in tos[to_id].children:
                    walk(child)

            walk(self._root)
            relations = {}
            counter = 0
            for to_id in df_order:
                for rel in self._relations.values():
                    owner = self._points.get(rel.p1)
                    if owner is None or owner.owner != to_id:
                        continue
                    counter += 1
                    relations[f"r{counter}"] = replace(rel, id=f"r{counter}")
            for rel in self._relations.values():  # dangling sources keep ids
                if rel.p1 not in self._points:
                    relations[rel.id] = rel
        return Score(root=self._root, temporal_objects=tos,
                     points=dict(self._points), relations=relations)
