"""Exhaustive small-scope trace enumeration.

Replays the engine from the start under every resolution of its two
nondeterminism sources: multi-option choice dispatches and random
duration draws.  Each run follows a decision tape; when the engine asks
for a decision past the tape's end, the run forks one branch per option.
The engine under any seed or policy consumes the same decision points in
the same order, so every engine trace on an enumerable score is a member
of the returned set.
"""

from __future__ import annotations

from dataclasses import dataclass

from .engine import ChoicePolicy, Trace, _TapeExhausted, init, step
from .model import Score


class StateBoundExceeded(Exception):
    def __init__(self, bound: int):
        super().__init__(f"exploration exceeded {bound} runs")
        self.bound = bound


@dataclass
class _Branch:
    options: int


def _run_tape(score: Score, by_tick: dict, depth: int, tape: list):
    """One replay; returns a Trace or a _Branch when the tape ran out."""
    events: list = []
    try:
        st = init(score, seed=0, policy=ChoicePolicy.AUTO_SEEDED, tape=tape)
        for t in range(depth):
            st, evs = step(st, by_tick.get(t, []))
            events.extend(evs)
            if st.is_quiescent():
                return Trace(events, "quiescent", t)
        return Trace(events, "max_ticks", depth)
    except _TapeExhausted as exc:
        return _Branch(exc.options)


def oracle_enumerate(score: Score, var_script: list, depth: int,
                     state_bound: int = 20000) -> list:
    """All traces up to `depth` ticks over every choice and duration draw."""
    by_tick: dict = {}
    for ev in var_script:
        by_tick.setdefault(ev.tick, []).append(ev)

    traces: list = []
    seen_keys: set = set()
    stack: list = [[]]
    runs = 0
    while stack:
        tape = stack.pop()
        runs += 1
        if runs > state_bound:
            raise StateBoundExceeded(state_bound)
        outcome = _run_tape(score, by_tick, depth, tape)
        if isinstance(outcome, _Branch):
            for i in reversed(range(outcome.options)):
                stack.append(tape + [i])
        else:
            key = outcome.key()
            if key not in seen_keys:
                seen_keys.add(key)
                traces.append(outcome)
    return traces


def trace_member(trace: Trace, enumerated: list) -> bool:
    key = trace.key()
    return any(key == other.key() for other in enumerated)
