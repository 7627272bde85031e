"""Exhaustive enumeration and engine-membership properties."""

from pathlib import Path

import pytest

from gen_scores import random_executable_score
from iscore.dsl import parse_text
from iscore.edition import compile_score
from iscore.engine import InputEvent, run
from iscore.model import Duration, ScoreBuilder, SendBehavior, VarValue
from iscore.oracle import StateBoundExceeded, oracle_enumerate, trace_member

SCORES = Path(__file__).parent.parent / "scores"


def compiled(name):
    score = parse_text((SCORES / name).read_text())
    out, _, _ = compile_score(score)
    return out


def finish_at(tick):
    return [InputEvent.set_var(tick, "A", "finish", VarValue.of_bool(True))]


class TestEnumeration:
    def test_loop_with_forced_conditions_has_one_trace(self):
        traces = oracle_enumerate(compiled("loop.isc"), finish_at(10), depth=20)
        assert len(traces) == 1

    def test_unconditional_choice_yields_one_trace_per_successor(self):
        # R.end is a choice between two unconditional continuations.
        b = ScoreBuilder()
        b.add_to("R", duration=Duration.fixed(1), end_send=SendBehavior.CH)
        b.add_to("X", parent="R", duration=Duration.fixed(1))
        b.add_to("Y", parent="R", duration=Duration.fixed(2))
        b.relate("R.start", "R.end", duration=Duration.fixed(1))
        b.relate("R.start", "X.start", duration=Duration.fixed(5))
        b.relate("R.end", "X.start", duration=Duration.fixed(0))
        b.relate("R.end", "Y.start", duration=Duration.fixed(0))
        b.relate("X.start", "X.end", duration=Duration.fixed(1))
        b.relate("Y.start", "Y.end", duration=Duration.fixed(2))
        score, _, _ = compile_score(b.build())
        traces = oracle_enumerate(score, [], depth=8)
        assert len(traces) == 2
        chosen = {t.of_kind("ChoiceResolved")[0].get("relation") for t in traces}
        assert len(chosen) == 2

    def test_choice_fixture_has_two_timings(self):
        traces = oracle_enumerate(compiled("rigidity_choice.isc"), [], depth=30)
        assert len(traces) >= 2
        t1_ends = set()
        for t in traces:
            ends = [e.tick for e in t.of_kind("InstanceEnded") if e.get("to") == "T1"]
            t1_ends.update(ends)
        assert len(t1_ends) >= 2  # the choice changes T1's completion

    def test_random_duration_branches_per_value(self):
        b = ScoreBuilder()
        b.add_to("A", duration=Duration.flexible())
        b.relate("A.start", "A.end", duration=Duration.random_between(1, 5))
        score, _, _ = compile_score(b.build())
        traces = oracle_enumerate(score, [], depth=10)
        ends = sorted(e.tick for t in traces for e in t.of_kind("InstanceEnded"))
        assert ends == [1, 2, 3, 4, 5]

    def test_state_bound(self):
        with pytest.raises(StateBoundExceeded):
            oracle_enumerate(compiled("mariona.isc"), [], depth=30, state_bound=2)


class TestMembership:
    def test_loop_runs_are_members(self):
        score = compiled("loop.isc")
        enumerated = oracle_enumerate(score, finish_at(10), depth=20)
        for seed in range(5):
            trace = run(score, finish_at(10), max_ticks=20, seed=seed)
            assert trace_member(trace, enumerated)

    def test_seeded_runs_of_random_scores_are_members(self):
        checked = 0
        for seed in range(40):
            score = random_executable_score(2000 + seed, max_tos=3, allow_ch=True)
            try:
                compiled_score, _, _ = compile_score(score)
            except Exception:
                continue
            enumerated = oracle_enumerate(compiled_score, [], depth=12,
                                          state_bound=5000)
            for engine_seed in (0, 1, 2):
                trace = run(compiled_score, [], max_ticks=12, seed=engine_seed)
                assert trace_member(trace, enumerated), (seed, engine_seed)
            checked += 1
        assert checked >= 30

    def test_mariona_run_is_member(self):
        score = compiled("mariona.isc")
        enumerated = oracle_enumerate(score, [], depth=10, state_bound=10000)
        trace = run(score, [], max_ticks=10, seed=3)
        assert trace_member(trace, enumerated)
