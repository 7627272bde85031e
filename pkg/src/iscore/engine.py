"""Deterministic tick-stepped performance engine.

One step consumes the inputs for the current tick and advances logical
time by one tick.  Within a tick the order is fixed: inputs apply first;
then wait jumps at their deadline and pending now jumps resolve; fired
jumps deliver to their target points (deepest instances first, then
arming order); executed choice points dispatch; and zero-duration chains
repeat the cycle to a fixpoint so `meets` compositions do not consume
extra ticks.  Start and end effects (spawning, ending, cancelling
descendants) happen inline at point execution, which is what lets a chain
of zero-duration relations start several instances in one tick.

Identical (score, seed, policy, script) always yields a byte-identical
trace: the only randomness is the seeded engine RNG, consumed in the
deterministic processing order.
"""

from __future__ import annotations

import copy
import json
import random
from dataclasses import dataclass, field
from enum import Enum

from .edition import UncompiledScoreError
from .model import (
    Score, TCR, VarEnv, VarValue, UNKNOWN, WaitBehavior, SendBehavior,
    PointRole, InstancePolicy, Tri, Evaluation, eval_condition, jump_enabled,
)


class ChoicePolicy(str, Enum):
    INTERACTIVE = "interactive"
    AUTO_SEEDED = "auto"


class InstanceStatus(str, Enum):
    RUNNING = "running"
    ENDED = "ended"
    CANCELLED = "cancelled"


class JumpState(str, Enum):
    ARMED = "armed"
    FIRED = "fired"
    DISCARDED = "discarded"


class ZeroDelayCycleError(Exception):
    def __init__(self, points):
        super().__init__(f"zero-duration jump cycle through {sorted(points)}")
        self.points = sorted(points)


class _TapeExhausted(Exception):
    """Internal: a scripted decision tape ran out at an n-way decision."""

    def __init__(self, options: int):
        super().__init__(f"decision tape exhausted at {options}-way decision")
        self.options = options


# ---------------------------------------------------------------------------
# Inputs and trace
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class InputEvent:
    tick: int
    kind: str  # "set_var" | "choose" | "noop"
    to: str = ""
    name: str = ""
    value: VarValue | None = None
    point: str = ""
    relation: str = ""

    @staticmethod
    def set_var(tick: int, to: str, name: str, value: VarValue) -> InputEvent:
        return InputEvent(tick, "set_var", to=to, name=name, value=value)

    @staticmethod
    def choose(tick: int, point: str, relation: str) -> InputEvent:
        return InputEvent(tick, "choose", point=point, relation=relation)

    @staticmethod
    def noop(tick: int) -> InputEvent:
        return InputEvent(tick, "noop")

    def to_json(self) -> dict:
        if self.kind == "set_var":
            return {"type": "set_var", "to": self.to, "name": self.name,
                    "value": None if self.value is None else self.value.to_json()}
        if self.kind == "choose":
            return {"type": "choose", "point": self.point, "relation": self.relation}
        return {"type": "noop"}

    @staticmethod
    def from_json(tick: int, doc: dict) -> InputEvent:
        kind = doc.get("type")
        if kind == "set_var":
            return InputEvent.set_var(tick, doc["to"], doc["name"],
                                      VarValue.from_json(doc.get("value")))
        if kind == "choose":
            return InputEvent.choose(tick, doc["point"], doc["relation"])
        if kind == "noop":
            return InputEvent.noop(tick)
        raise ValueError(f"unknown input event type {kind!r}")


@dataclass(frozen=True)
class TraceEvent:
    tick: int
    kind: str
    data: tuple  # ordered (key, value) pairs; values are JSON-ready

    @staticmethod
    def make(tick: int, kind: str, **fields) -> TraceEvent:
        return TraceEvent(tick, kind, tuple(fields.items()))

    def to_json(self) -> dict:
        doc = {"tick": self.tick, "kind": self.kind}
        doc.update(dict(self.data))
        return doc

    def get(self, key: str, default=None):
        return dict(self.data).get(key, default)


@dataclass
class Trace:
    events: list
    reason: str       # "quiescent" | "max_ticks"
    final_tick: int

    def to_jsonl(self) -> str:
        return "\n".join(json.dumps(e.to_json(), ensure_ascii=False, sort_keys=False)
                         for e in self.events) + ("\n" if self.events else "")

    def of_kind(self, kind: str) -> list:
        return [e for e in self.events if e.kind == kind]

    def key(self) -> tuple:
        return tuple(json.dumps(e.to_json(), ensure_ascii=False) for e in self.events)


# ---------------------------------------------------------------------------
# Runtime state
# ---------------------------------------------------------------------------

@dataclass
class Instance:
    id: str
    to_id: str
    start_tick: int
    status: InstanceStatus
    env: VarEnv
    parent: str | None
    depth: int
    end_tick: int | None = None
    sampled: dict = field(default_factory=dict)  # relation id -> sampled ticks


@dataclass
class PendingJump:
    seq: int
    relation: str
    source_instance: str
    activation: int
    deadline: int
    state: JumpState = JumpState.ARMED


@dataclass
class EngineState:
    score: Score
    seed: int
    policy: ChoicePolicy
    tick: int = 0
    instances: dict = field(default_factory=dict)   # id -> Instance
    jumps: list = field(default_factory=list)       # armed PendingJumps
    waitsets: dict = field(default_factory=dict)    # point id -> {rid: slot state}
    awaiting: dict = field(default_factory=dict)    # CH point id -> (ctx id, options)
    delay_queue: dict = field(default_factory=dict)  # to id -> queued activations
    instance_seq: dict = field(default_factory=dict)  # to id -> count
    jump_seq: int = 0
    rng: random.Random = field(default_factory=random.Random)
    tape: list | None = None   # decision tape; overrides the RNG when set
    pending_events: list = field(default_factory=list)
    pending_gathers: list = field(default_factory=list)

    def clone(self) -> EngineState:
        new = copy.copy(self)
        memo: dict = {}
        new.instances = copy.deepcopy(self.instances, memo)
        new.jumps = copy.deepcopy(self.jumps, memo)
        new.waitsets = {p: dict(slots) for p, slots in self.waitsets.items()}
        new.awaiting = dict(self.awaiting)
        new.delay_queue = dict(self.delay_queue)
        new.instance_seq = dict(self.instance_seq)
        new.rng = copy.deepcopy(self.rng)
        new.tape = None if self.tape is None else list(self.tape)
        new.pending_events = list(self.pending_events)
        new.pending_gathers = list(self.pending_gathers)
        return new

    def live_instances(self, to_id: str | None = None) -> list:
        out = [i for i in self.instances.values() if i.status is InstanceStatus.RUNNING]
        if to_id is not None:
            out = [i for i in out if i.to_id == to_id]
        return out

    def is_quiescent(self) -> bool:
        return (not self.live_instances()
                and not any(j.state is JumpState.ARMED for j in self.jumps)
                and not self.awaiting
                and not any(self.delay_queue.values()))

    def snapshot(self) -> dict:
        """JSON projection of the full state (wire `snapshot` payload)."""
        return {
            "tick": self.tick,
            "policy": self.policy.value,
            "seed": self.seed,
            "instances": [
                {"id": i.id, "to": i.to_id, "status": i.status.value,
                 "start_tick": i.start_tick, "end_tick": i.end_tick,
                 "parent": i.parent,
                 "vars": {k: v.to_json() for k, v in sorted(i.env.bindings.items())}}
                for i in sorted(self.instances.values(), key=lambda i: i.id)
            ],
            "armed_jumps": [
                {"relation": j.relation, "source_instance": j.source_instance,
                 "activation": j.activation, "deadline": j.deadline}
                for j in self.jumps if j.state is JumpState.ARMED
            ],
            "awaiting_choices": [
                {"point": p, "options": list(opts)}
                for p, (_, opts) in sorted(self.awaiting.items())
            ],
        }


# ---------------------------------------------------------------------------
# Decisions
# ---------------------------------------------------------------------------

def sample_random_duration(rng: random.Random, lo: int, hi: int) -> int:
    """Uniform integer in [lo, hi]; deterministic given the RNG state."""
    if lo > hi:
        raise ValueError(f"random duration bounds reversed: [{lo}, {hi}]")
    if lo == hi:
        return lo
    return rng.randint(lo, hi)


def _decide(st: EngineState, options: int) -> int:
    if st.tape is not None:
        if not st.tape:
            raise _TapeExhausted(options)
        return st.tape.pop(0)
    return st.rng.randrange(options)


# ---------------------------------------------------------------------------
# Engine
# ---------------------------------------------------------------------------

def init(score: Score, seed: int = 0,
         policy: ChoicePolicy = ChoicePolicy.AUTO_SEEDED,
         tape: list | None = None) -> EngineState:
    """Fresh state at tick 0 with the root instance started.

    Requires a compiled score (every duration carries a nominal); the
    zero-duration chains out of the root start resolve during the first
    step so that tick-0 inputs can influence them.  `tape` installs a
    decision tape (used by the exhaustive oracle) before the root spawn,
    which may already draw random durations.
    """
    if not score.is_compiled():
        raise UncompiledScoreError("score has unassigned nominal durations; compile first")
    st = EngineState(score=score, seed=seed, policy=policy)
    st.rng.seed(seed)
    st.tape = list(tape) if tape is not None else None
    root = score.to(score.root)
    st.pending_gathers = _execute_start_point(st, root.id, trigger=None,
                                              events=st.pending_events)
    return st


def step(st: EngineState, inputs: list) -> tuple:
    """Advance one tick; pure on (state, inputs)."""
    st = st.clone()
    events: list = st.pending_events
    st.pending_events = []
    tick = st.tick
    executed_this_tick: set = set()
    choices: dict = {}

    # (1) inputs
    for ev in inputs:
        if ev.kind == "set_var":
            value = ev.value if ev.value is not None else UNKNOWN
            for inst in st.live_instances(ev.to):
                inst.env.set(ev.name, value)
            events.append(TraceEvent.make(tick, "VarSet", to=ev.to, name=ev.name,
                                          value=value.to_json()))
        elif ev.kind == "choose":
            choices[ev.point] = ev.relation

    # Awaiting CH points re-gather once per tick; init may have left gathers.
    gathers: list = st.pending_gathers + [(p, ctx) for p, (ctx, _) in
                                          sorted(st.awaiting.items())]
    st.pending_gathers = []

    rounds = 0
    max_rounds = len(st.score.points) + 2
    while True:
        rounds += 1
        if rounds > max_rounds:
            raise ZeroDelayCycleError(executed_this_tick or set(st.score.points))
        progress = False

        # (2) wait jumps at their deadline, in arming order.
        deliveries: list = []
        for jump in st.jumps:
            if jump.state is not JumpState.ARMED:
                continue
            rel = st.score.relations[jump.relation]
            if rel.evaluation is Evaluation.WAIT:
                if jump.deadline != tick:
                    continue
                progress = True
                _resolve(st, jump, rel, deliveries, events, tick)
            else:
                # (3) now jumps: fire as soon as enabled, discard at deadline.
                if jump.activation > tick:
                    continue
                env = st.instances[jump.source_instance].env
                if jump_enabled(rel, env):
                    progress = True
                    jump.state = JumpState.FIRED
                    events.append(TraceEvent.make(
                        tick, "JumpFired", relation=rel.id,
                        source=rel.p1, target=rel.p2, instance=jump.source_instance))
                    deliveries.append(jump)
                elif jump.deadline <= tick:
                    progress = True
                    _discard(st, jump, rel, events, tick, reason="never-enabled")

        # (4) deliveries: deepest source instances first, then arming order.
        deliveries.sort(key=lambda j: (-st.instances[j.source_instance].depth, j.seq))
        for jump in deliveries:
            rel = st.score.relations[jump.relation]
            executed = _deliver(st, jump, rel, events, tick, executed_this_tick, gathers)
            progress = progress or executed

        # (5) choice dispatch for CH points executed (or still awaiting).
        gathers.extend(st.pending_gathers)
        st.pending_gathers = []
        pending, gathers = gathers, []
        for point_id, ctx_id in pending:
            progress |= _gather_choice(st, point_id, ctx_id, choices, events, tick)

        if not progress:
            break

    # (7) ending an instance cancels descendants that are still running
    # after the fixpoint settles.
    ended_now = sorted((i for i in st.instances.values()
                        if i.status is InstanceStatus.ENDED and i.end_tick == tick),
                       key=lambda i: (i.depth, _inst_order(i)))
    for inst in ended_now:
        for desc in _descendants(st, inst):
            if desc.status is InstanceStatus.RUNNING:
                _cancel(st, desc, events, tick)

    # (8) local constraints are assertions, checked every tick.
    for inst in sorted(st.live_instances(), key=lambda i: i.id):
        t = st.score.to(inst.to_id)
        if eval_condition(t.constraint, inst.env) is Tri.FALSE:
            events.append(TraceEvent.make(tick, "ConstraintViolated",
                                          instance=inst.id, to=inst.to_id))

    st.jumps = [j for j in st.jumps if j.state is JumpState.ARMED]
    st.tick = tick + 1
    return st, events


def run(score: Score, script: list, max_ticks: int = 100, seed: int = 0,
        policy: ChoicePolicy = ChoicePolicy.AUTO_SEEDED) -> Trace:
    """Step until quiescent (no live instances, armed jumps, queued
    activations, or awaited choices) or until max_ticks."""
    st = init(score, seed, policy)
    by_tick: dict = {}
    for ev in script:
        by_tick.setdefault(ev.tick, []).append(ev)
    events: list = []
    for t in range(max_ticks):
        st, evs = step(st, by_tick.get(t, []))
        events.extend(evs)
        if st.is_quiescent():
            return Trace(events, "quiescent", t)
    return Trace(events, "max_ticks", max_ticks)


# ---------------------------------------------------------------------------
# Internals
# ---------------------------------------------------------------------------

def _resolve(st, jump, rel: TCR, deliveries, events, tick):
    env = st.instances[jump.source_instance].env
    if jump_enabled(rel, env):
        jump.state = JumpState.FIRED
        events.append(TraceEvent.make(tick, "JumpFired", relation=rel.id,
                                      source=rel.p1, target=rel.p2,
                                      instance=jump.source_instance))
        deliveries.append(jump)
    else:
        _discard(st, jump, rel, events, tick, reason="condition")


def _discard(st, jump, rel: TCR, events, tick, reason: str):
    jump.state = JumpState.DISCARDED
    events.append(TraceEvent.make(tick, "JumpDiscarded", relation=rel.id,
                                  target=rel.p2, reason=reason))
    _waitset_mark(st, rel, "discarded")


def _waitset_mark(st, rel: TCR, slot_state: str):
    target = st.score.points.get(rel.p2)
    if target is None or target.wait is not WaitBehavior.WA:
        return
    slots = st.waitsets.get(rel.p2)
    if slots is None:
        slots = {r.id: "pending" for r in st.score.incoming(rel.p2)}
        st.waitsets[rel.p2] = slots
    slots[rel.id] = slot_state


def _waitset_complete(st, point_id: str) -> bool:
    slots = st.waitsets.get(point_id)
    if not slots:
        return False
    states = set(slots.values())
    return ("pending" not in states and "armed" not in states
            and "arrived" in states)


def _arm_outgoing(st, point_id: str, ctx: Instance, events, tick):
    point = st.score.points[point_id]
    outgoing = sorted(st.score.outgoing(point_id), key=lambda r: r.id)
    if point.send is SendBehavior.CH:
        return [(point_id, ctx.id)]  # defer to choice dispatch
    for rel in outgoing:
        _arm(st, rel, ctx, tick)
    return []


def _arm(st, rel: TCR, ctx: Instance, tick):
    if rel.duration.random:
        lo, hi = rel.duration.min, rel.duration.max
        if st.tape is not None:
            if not st.tape:
                raise _TapeExhausted(hi - lo + 1)
            dur = lo + st.tape.pop(0)
        else:
            dur = sample_random_duration(st.rng, lo, hi)
        ctx.sampled[rel.id] = dur
    else:
        dur = rel.duration.nominal
    st.jump_seq += 1
    jump = PendingJump(st.jump_seq, rel.id, ctx.id, tick, tick + dur)
    st.jumps.append(jump)
    _waitset_mark(st, rel, "armed")


def _inst_order(inst: Instance):
    return (inst.start_tick, int(inst.id.rsplit("#", 1)[1]))


def _instance_of(st, to_id: str, near: Instance | None) -> Instance | None:
    """Live instance of `to_id`: an ancestor of `near` when one exists,
    else the oldest live instance."""
    if near is not None:
        cur: Instance | None = near
        while cur is not None:
            if cur.to_id == to_id and cur.status is InstanceStatus.RUNNING:
                return cur
            cur = st.instances.get(cur.parent) if cur.parent else None
    live = st.live_instances(to_id)
    return min(live, key=_inst_order) if live else None


def _deliver(st, jump, rel: TCR, events, tick, executed_this_tick, gathers) -> bool:
    target = rel.p2
    point = st.score.points[target]
    source_inst = st.instances[jump.source_instance]

    if point.role is PointRole.START:
        # Start points dispatch per delivery through the instance policy;
        # a WA start behaves like WF (loop re-entry would deadlock otherwise).
        gathers.extend(
            _execute_start_point(st, point.owner, trigger=source_inst, events=events))
        return True

    # Re-deliveries to a point that already executed this tick are ignored.
    if target in executed_this_tick:
        return False
    if point.wait is WaitBehavior.WA:
        _waitset_mark(st, rel, "arrived")
        if not _waitset_complete(st, target):
            return False
        del st.waitsets[target]
    gathers.extend(_execute_end_point(st, point.owner, source_inst, rel, events,
                                      tick, executed_this_tick))
    return True


def _spawn(st, to_id: str, parent: Instance | None, events, tick) -> list:
    t = st.score.to(to_id)
    st.instance_seq[to_id] = st.instance_seq.get(to_id, 0) + 1
    inst_id = f"{to_id}#{st.instance_seq[to_id]}"
    bindings = {name: (init if init is not None else UNKNOWN)
                for name, init in t.vars.items()}
    env = VarEnv(to_id, bindings, parent.env if parent else None)
    inst = Instance(inst_id, to_id, tick, InstanceStatus.RUNNING, env,
                    parent.id if parent else None,
                    depth=(parent.depth + 1 if parent else 1))
    st.instances[inst_id] = inst
    events.append(TraceEvent.make(
        tick, "PointExecuted", point=t.start, instance=inst_id))
    events.append(TraceEvent.make(
        tick, "InstanceStarted", instance=inst_id, to=to_id,
        parent=parent.id if parent else None, process=t.process,
        params={k: v.to_json() for k, v in sorted(t.params.items())}))
    return _arm_outgoing(st, t.start, inst, events, tick)


def _execute_start_point(st, to_id: str, trigger: Instance | None, events) -> list:
    """Control reached a start point: spawn, subject to the instance policy."""
    tick = st.tick
    t = st.score.to(to_id)
    parent_to = st.score.parent_of(to_id)
    parent = None
    if parent_to is not None:
        parent = _instance_of(st, parent_to, trigger)
        if parent is None:
            events.append(TraceEvent.make(
                tick, "JumpDiscarded", relation=None, target=t.start,
                reason="no-live-parent"))
            return []
    running = st.live_instances(to_id)
    if not running:
        return _spawn(st, to_id, parent, events, tick)

    policy = t.instance_policy
    events.append(TraceEvent.make(tick, "PolicyApplied", policy=policy.value,
                                  to=to_id, running=sorted(i.id for i in running)))
    if policy is InstancePolicy.ALLOW:
        return _spawn(st, to_id, parent, events, tick)
    if policy is InstancePolicy.DELAY:
        st.delay_queue[to_id] = st.delay_queue.get(to_id, 0) + 1
        return []
    if policy is InstancePolicy.CANCEL:
        for inst in running:
            _cancel(st, inst, events, tick)
        return _spawn(st, to_id, parent, events, tick)
    # Split: the incoming control merges into the running instance.
    return []


def _execute_end_point(st, to_id: str, source_inst: Instance, via: TCR,
                       events, tick, executed_this_tick) -> list:
    t = st.score.to(to_id)
    inst = _instance_of(st, to_id, source_inst)
    if inst is None:
        events.append(TraceEvent.make(tick, "JumpDiscarded", relation=via.id,
                                      target=t.end, reason="no-live-instance"))
        return []
    executed_this_tick.add(t.end)
    events.append(TraceEvent.make(tick, "PointExecuted", point=t.end, instance=inst.id))
    inst.status = InstanceStatus.ENDED
    inst.end_tick = tick
    events.append(TraceEvent.make(tick, "InstanceEnded", instance=inst.id, to=to_id))
    # Descendants still running once the tick's zero-duration chains settle
    # are cancelled at the end of the step, not here: a sibling chain may
    # legitimately complete them within this same tick.
    gathers = _arm_outgoing(st, t.end, inst, events, tick)
    # A queued delayed activation spawns the tick the running instance ends.
    if st.delay_queue.get(to_id, 0) > 0:
        st.delay_queue[to_id] -= 1
        parent = st.instances.get(inst.parent) if inst.parent else None
        if parent is None or parent.status is InstanceStatus.RUNNING:
            gathers.extend(_spawn(st, to_id, parent, events, tick))
    return gathers


def _descendants(st, inst: Instance) -> list:
    out = []
    frontier = [inst.id]
    while frontier:
        cur = frontier.pop()
        for other in st.instances.values():
            if other.parent == cur:
                out.append(other)
                frontier.append(other.id)
    return sorted(out, key=lambda i: (i.depth, _inst_order(i)))


def _cancel(st, inst: Instance, events, tick):
    inst.status = InstanceStatus.CANCELLED
    inst.end_tick = tick
    events.append(TraceEvent.make(tick, "InstanceCancelled", instance=inst.id,
                                  to=inst.to_id))
    doomed = {inst.id} | {d.id for d in _descendants(st, inst)}
    for jump in st.jumps:
        if jump.state is JumpState.ARMED and jump.source_instance in doomed:
            rel = st.score.relations[jump.relation]
            _discard(st, jump, rel, events, tick, reason="instance-cancelled")
    for desc in _descendants(st, inst):
        if desc.status is InstanceStatus.RUNNING:
            _cancel(st, desc, events, tick)
    if st.delay_queue.get(inst.to_id, 0) > 0:
        st.delay_queue[inst.to_id] -= 1
        parent = st.instances.get(inst.parent) if inst.parent else None
        if parent is None or parent.status is InstanceStatus.RUNNING:
            st.pending_gathers.extend(_spawn(st, inst.to_id, parent, events, tick))


def _gather_choice(st, point_id: str, ctx_id: str, choices, events, tick) -> bool:
    ctx = st.instances[ctx_id]
    outgoing = sorted(st.score.outgoing(point_id), key=lambda r: r.id)
    enabled = [r for r in outgoing if jump_enabled(r, ctx.env)]
    if not enabled:
        for rel in outgoing:
            events.append(TraceEvent.make(tick, "JumpDiscarded", relation=rel.id,
                                          target=rel.p2, reason="not-enabled"))
            _waitset_mark(st, rel, "discarded")
        st.awaiting.pop(point_id, None)
        return True

    chosen: TCR | None = None
    if point_id in choices:
        match = [r for r in enabled if r.id == choices[point_id]]
        if match:
            chosen = match[0]
    if chosen is None and len(enabled) == 1:
        chosen = enabled[0]
    if chosen is None and st.policy is ChoicePolicy.AUTO_SEEDED:
        chosen = enabled[_decide(st, len(enabled))]
    if chosen is None and st.tape is not None:
        chosen = enabled[_decide(st, len(enabled))]

    if chosen is not None:
        st.awaiting.pop(point_id, None)
        for rel in outgoing:
            if rel.id != chosen.id:
                events.append(TraceEvent.make(tick, "JumpDiscarded", relation=rel.id,
                                              target=rel.p2, reason="not-chosen"))
                _waitset_mark(st, rel, "discarded")
        events.append(TraceEvent.make(tick, "ChoiceResolved", point=point_id,
                                      relation=chosen.id, instance=ctx_id))
        _arm(st, chosen, ctx, tick)
        return True

    # Interactive: keep waiting; announce when new or when the options change.
    options = tuple(r.id for r in enabled)
    previous = st.awaiting.get(point_id)
    st.awaiting[point_id] = (ctx_id, options)
    if previous is None or previous[1] != options:
        events.append(TraceEvent.make(tick, "AwaitingChoice", point=point_id,
                                      options=list(options)))
    return False
