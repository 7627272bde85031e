"""Qualitative interval scores and their conditional-relation encoding.

A qualitative score is a tree of interval objects plus interval relations
(before, meets, overlaps, starts, during, finishes, equals; inverses are
operand swaps).  Encoding turns every interval object into a temporal
object whose points all wait for all predecessors and transfer to all
enabled successors, adds one unconditional start-to-end relation per
object carrying its duration, anchors otherwise-unconstrained children to
their parent's start with a zero-duration relation, and lowers each
interval relation to unconditional when/wait relations over endpoints.

Strict endpoint inequalities use a one-tick semi-rigid separation (a tick
is the smallest distinguishable gap).  A required simultaneity between
two endpoints is a single zero-duration relation oriented from the
endpoint with the later static arrival into the earlier one, so the
earlier endpoint's wait-for-all join stretches up to it; ties keep the
first operand as the source.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

from .model import (
    TRUE, Condition, Duration, Score, ScoreBuilder, SendBehavior, TCR,
    WaitBehavior, end_point_id, start_point_id,
)


class AllenRelation(str, Enum):
    BEFORE = "before"
    MEETS = "meets"
    OVERLAPS = "overlaps"
    STARTS = "starts"
    DURING = "during"
    FINISHES = "finishes"
    EQUALS = "equals"


@dataclass(frozen=True)
class QTemporalObject:
    id: str
    duration: Duration
    process: str = "silence"
    constraint: Condition = TRUE
    children: tuple = ()
    start_date_hint: int | None = None


@dataclass(frozen=True)
class QRelation:
    relation: AllenRelation
    t1: str
    t2: str


@dataclass(frozen=True)
class QScore:
    root: QTemporalObject
    relations: tuple = ()


class QScoreError(Exception):
    pass


class MissingInstanceError(Exception):
    pass


def _q_index(root: QTemporalObject) -> dict:
    out: dict = {}

    def walk(q: QTemporalObject):
        if q.id in out:
            raise QScoreError(f"duplicate interval object id {q.id!r}")
        out[q.id] = q
        for child in q.children:
            walk(child)

    walk(root)
    return out


def q_validate(q: QScore) -> None:
    index = _q_index(q.root)
    for rel in q.relations:
        if rel.t1 == rel.t2:
            raise QScoreError(f"relation {rel.relation.value} relates {rel.t1!r} to itself")
        for t in (rel.t1, rel.t2):
            if t not in index:
                raise QScoreError(f"relation references unknown object {t!r}")


# ---------------------------------------------------------------------------
# Allen-relation lowering
# ---------------------------------------------------------------------------

def _lower(d: Duration) -> int:
    return d.min


def _sep() -> Duration:
    return Duration.semi_rigid(1)  # strict inequality: one-tick separation


def _zero() -> Duration:
    return Duration.fixed(0)


def encode_allen(a: AllenRelation, t1: QTemporalObject, t2: QTemporalObject) -> list:
    """Endpoint relations for `a` between t1 and t2 (unconditional when/wait).

    Returned TCRs carry deterministic ids derived from the relation and
    operands, so re-encoding the same score yields the same relations.
    """
    s1, e1 = start_point_id(t1.id), end_point_id(t1.id)
    s2, e2 = start_point_id(t2.id), end_point_id(t2.id)
    prefix = f"a_{a.value}_{t1.id}_{t2.id}"
    out: list = []

    def tcr(k: int, p1: str, p2: str, dur: Duration):
        out.append(TCR(f"{prefix}_{k}", p1, p2, TRUE, dur))

    def simultaneous(k: int, pa: str, pb: str, arrive_a: int, arrive_b: int):
        # Single directed zero-duration edge from the later static arrival
        # into the earlier one; the earlier WA join stretches up to it.
        if arrive_a >= arrive_b:
            tcr(k, pa, pb, _zero())
        else:
            tcr(k, pb, pa, _zero())

    d1, d2 = _lower(t1.duration), _lower(t2.duration)
    if a is AllenRelation.BEFORE:
        tcr(0, e1, s2, _sep())
    elif a is AllenRelation.MEETS:
        tcr(0, e1, s2, _zero())
    elif a is AllenRelation.EQUALS:
        tcr(0, s1, s2, _zero())
        simultaneous(1, e1, e2, d1, d2)
    elif a is AllenRelation.STARTS:
        tcr(0, s1, s2, _zero())
        tcr(1, e1, e2, _sep())
    elif a is AllenRelation.FINISHES:
        tcr(0, s2, s1, _sep())
        simultaneous(1, e1, e2, 1 + d1, d2)
    elif a is AllenRelation.DURING:
        tcr(0, s2, s1, _sep())
        tcr(1, e1, e2, _sep())
    elif a is AllenRelation.OVERLAPS:
        tcr(0, s1, s2, _sep())
        tcr(1, s2, e1, _sep())
        tcr(2, e1, e2, _sep())
    else:
        raise QScoreError(f"unknown interval relation {a!r}")
    return out


def encode_score(q: QScore) -> Score:
    """Lower a qualitative score to a conditional-relation score."""
    q_validate(q)
    index = _q_index(q.root)

    allen_tcrs: list = []
    for rel in q.relations:
        allen_tcrs.append(encode_allen(rel.relation, index[rel.t1], index[rel.t2]))
    flat = [t for group in allen_tcrs for t in group]
    anchored_starts = {t.p2 for t in flat}

    b = ScoreBuilder()

    def walk(node: QTemporalObject, parent: str | None):
        b.add_to(node.id, parent=parent, duration=node.duration,
                 constraint=node.constraint, process=node.process,
                 start_wait=WaitBehavior.WA, start_send=SendBehavior.NCH,
                 end_wait=WaitBehavior.WA, end_send=SendBehavior.NCH)
        for child in node.children:
            walk(child, node.id)

    walk(q.root, None)

    for to_id in sorted(index):
        node = index[to_id]
        b.relate(start_point_id(to_id), end_point_id(to_id),
                 duration=node.duration, rel_id=f"dur_{to_id}")
    for t in flat:
        b.relate(t.p1, t.p2, duration=t.duration, rel_id=t.id)

    def anchor(node: QTemporalObject):
        unanchored = [c for c in node.children
                      if start_point_id(c.id) not in anchored_starts]
        targets = unanchored if unanchored or not node.children else [node.children[0]]
        for child in targets:
            b.relate(start_point_id(node.id), start_point_id(child.id),
                     duration=_zero(), rel_id=f"anchor_{child.id}")
        for child in node.children:
            anchor(child)

    anchor(q.root)
    return b.build()


# ---------------------------------------------------------------------------
# Trace-side checks
# ---------------------------------------------------------------------------

def observed_interval(trace, to_id: str) -> tuple:
    """(start, end) ticks of the unique instance of `to_id` in a trace."""
    starts = [e.tick for e in trace.events
              if e.kind == "InstanceStarted" and e.get("to") == to_id]
    ends = [e.tick for e in trace.events
            if e.kind == "InstanceEnded" and e.get("to") == to_id]
    if len(starts) != 1 or len(ends) != 1:
        raise MissingInstanceError(
            f"{to_id}: expected exactly one instance, saw {len(starts)} starts "
            f"and {len(ends)} ends")
    return starts[0], ends[0]


def meets_constraint_check(trace, a: str, b: str) -> bool:
    """start(a) == start(b) + observed duration(b), for `b meets a` traces."""
    sa, _ = observed_interval(trace, a)
    sb, eb = observed_interval(trace, b)
    return sa == sb + (eb - sb)


def endpoint_predicate(a: AllenRelation, sa: int, ea: int, sb: int, eb: int) -> bool:
    """The standard endpoint-order definition of each interval relation."""
    if a is AllenRelation.BEFORE:
        return ea < sb
    if a is AllenRelation.MEETS:
        return ea == sb
    if a is AllenRelation.OVERLAPS:
        return sa < sb < ea < eb
    if a is AllenRelation.STARTS:
        return sa == sb and ea < eb
    if a is AllenRelation.DURING:
        return sb < sa and ea < eb
    if a is AllenRelation.FINISHES:
        return ea == eb and sb < sa
    if a is AllenRelation.EQUALS:
        return sa == sb and ea == eb
    raise QScoreError(f"unknown interval relation {a!r}")


def trace_satisfies(trace, rel: QRelation) -> bool:
    sa, ea = observed_interval(trace, rel.t1)
    sb, eb = observed_interval(trace, rel.t2)
    return endpoint_predicate(rel.relation, sa, ea, sb, eb)


# ---------------------------------------------------------------------------
# JSON form (CLI `encode` input)
# ---------------------------------------------------------------------------

def q_to_json(q: QScore) -> dict:
    def node(n: QTemporalObject) -> dict:
        from .dsl import _duration_to_json
        doc = {"id": n.id, "duration": _duration_to_json(n.duration)}
        if n.process != "silence":
            doc["process"] = n.process
        if n.children:
            doc["children"] = [node(c) for c in n.children]
        return doc

    return {"format": "iscore-q", "version": 1, "root": node(q.root),
            "relations": [{"relation": r.relation.value, "t1": r.t1, "t2": r.t2}
                          for r in q.relations]}


def q_from_json(doc) -> QScore:
    from .dsl import SchemaError, _duration_from_json

    if not isinstance(doc, dict) or doc.get("format") != "iscore-q":
        raise SchemaError("/format", "expected 'iscore-q'")

    def node(ndoc, path: str) -> QTemporalObject:
        if "id" not in ndoc:
            raise SchemaError(path + "/id", "missing required key")
        dur = (_duration_from_json(ndoc["duration"], path + "/duration")
               if "duration" in ndoc else Duration.flexible())
        return QTemporalObject(
            id=ndoc["id"], duration=dur, process=ndoc.get("process", "silence"),
            children=tuple(node(c, f"{path}/children/{i}")
                           for i, c in enumerate(ndoc.get("children", []))))

    rels = []
    for i, rdoc in enumerate(doc.get("relations", [])):
        path = f"/relations/{i}"
        try:
            rel = AllenRelation(rdoc.get("relation"))
        except ValueError:
            raise SchemaError(path + "/relation",
                              f"unknown interval relation {rdoc.get('relation')!r}")
        rels.append(QRelation(rel, rdoc["t1"], rdoc["t2"]))
    return QScore(root=node(doc.get("root", {}), "/root"), relations=tuple(rels))
