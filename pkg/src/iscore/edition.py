"""Edition phase: nominal durations, date sets, and rigidity feasibility.

Nominal durations come from a worklist fixpoint over the point graph, no
external solver.  Starting from every duration's lower bound, values are
raised minimally until the hard equalities hold:

  * a TO's duration agrees with each of its direct start-to-end relations
    (parallel rigid disagreements are infeasible), and
  * a rigid container is long enough for its children's static end dates.

Arrival equalization at wait-for-all points is soft: flexible durations
stretch toward the latest incoming arrival, but bounded durations that
cannot reach it are left alone (the performance engine waits instead;
only flexible durations are guaranteed coherent).

Date sets reproduce loop timing as arithmetic progressions: a point
associated with exactly one simple-cycle period (on the cycle, ahead of
it, or behind it) gets Progression{earliest arrival, period}; acyclic
points get the exact set of simple-path sums, weakening to AtLeast when a
random duration makes the sums uncertain; points touching two distinct
periods collapse to Unknown.
"""

from __future__ import annotations

import heapq
from dataclasses import dataclass, replace

from .model import (
    DateSet, Duration, DurationClass, ProcessRegistry, Score, SendBehavior,
    WaitBehavior, has_errors, validate_score,
)


class InfeasibleError(Exception):
    """Rigid bounds contradict; carries a human-readable description."""


class UncompiledScoreError(Exception):
    """An operation needed nominal durations that are not assigned."""


class ValidationFailed(Exception):
    def __init__(self, diagnostics: list[Diagnostic]):
        super().__init__("; ".join(str(d) for d in diagnostics))
        self.diagnostics = diagnostics


@dataclass(frozen=True)
class RigidityWarning:
    to: str
    reason: str   # "choice-downstream" | "choice-upstream"
    witness: str  # the CH point whose branches disagree

    def __str__(self) -> str:
        return f"{self.to}: duration depends on choice at {self.witness} ({self.reason})"


@dataclass
class EditionResult:
    dates: dict            # point id -> DateSet
    nominal_durations: dict  # TCR id | TO id -> ticks
    warnings: list         # list[RigidityWarning]


@dataclass
class PointGraph:
    """Relation structure of a score: points as nodes, TCRs as weighted edges."""

    entry: str
    nodes: list
    out_edges: dict   # pid -> list[(rid, target)]
    in_edges: dict    # pid -> list[(rid, source)]

    @staticmethod
    def of(score: Score) -> PointGraph:
        nodes = sorted(score.points)
        out_edges = {p: [] for p in nodes}
        in_edges = {p: [] for p in nodes}
        for rid in sorted(score.relations):
            r = score.relations[rid]
            out_edges[r.p1].append((rid, r.p2))
            in_edges[r.p2].append((rid, r.p1))
        for p in nodes:
            out_edges[p].sort()
            in_edges[p].sort()
        return PointGraph(score.to(score.root).start, nodes, out_edges, in_edges)


# ---------------------------------------------------------------------------
# Nominal assignment
# ---------------------------------------------------------------------------

def _all_durations(score: Score) -> dict:
    durs = {t.id: t.duration for t in score.temporal_objects.values()}
    durs.update({r.id: r.duration for r in score.relations.values()})
    return durs


def _upper(d: Duration):
    if d.random:
        return d.min  # sampled at performance time; the nominal stays the floor
    return d.max if d.cls is DurationClass.RIGID else None


@dataclass
class _Arrivals:
    theta: dict    # pid -> int | None (first arrival; None if never executes)
    certain: dict  # pid -> bool (False when a random edge feeds the arrival)
    det_edge: dict  # pid -> rid | None (edge determining the arrival)


def _tarjan_sccs(graph: PointGraph) -> list[list[str]]:
    index: dict[str, int] = {}
    low: dict[str, int] = {}
    on_stack: set[str] = set()
    stack: list[str] = []
    sccs: list[list[str]] = []
    counter = [0]

    def strongconnect(v: str):
        # Iterative Tarjan to stay clear of recursion limits.
        work = [(v, 0)]
        while work:
            node, ei = work[-1]
            if ei == 0:
                index[node] = low[node] = counter[0]
                counter[0] += 1
                stack.append(node)
                on_stack.add(node)
            advanced = False
            edges = graph.out_edges[node]
            while ei < len(edges):
                _, w = edges[ei]
                ei += 1
                if w not in index:
                    work[-1] = (node, ei)
                    work.append((w, 0))
                    advanced = True
                    break
                if w in on_stack:
                    low[node] = min(low[node], index[w])
            if advanced:
                continue
            work.pop()
            if low[node] == index[node]:
                scc = []
                while True:
                    w = stack.pop()
                    on_stack.discard(w)
                    scc.append(w)
                    if w == node:
                        break
                sccs.append(sorted(scc))
            if work:
                parent, _ = work[-1]
                low[parent] = min(low[parent], low[node])

    for v in graph.nodes:
        if v not in index:
            strongconnect(v)
    return sccs


def _first_arrivals(score: Score, graph: PointGraph, n: dict,
                    uncertain_edges: set) -> _Arrivals:
    """Static first-execution dates under nominal pacing.

    Wait-for-all points execute at the max incoming arrival and block when
    any static predecessor never executes; wait-first points take the min.
    Inside a cycle region the first traversal is a shortest path from the
    region's entries.
    """
    sccs = _tarjan_sccs(graph)
    scc_of = {p: i for i, scc in enumerate(sccs) for p in scc}
    # Topological order of the condensation.
    order = sorted(range(len(sccs)), key=lambda i: _scc_rank(sccs, scc_of, graph, i))

    theta: dict = {p: None for p in graph.nodes}
    certain: dict = {p: True for p in graph.nodes}
    det_edge: dict = {p: None for p in graph.nodes}

    for i in order:
        scc = sccs[i]
        nontrivial = len(scc) > 1 or any(t == scc[0] for _, t in graph.out_edges[scc[0]])
        if not nontrivial:
            p = scc[0]
            if p == graph.entry:
                theta[p] = 0
                continue
            arrivals = []
            blocked = False
            for rid, src in graph.in_edges[p]:
                if theta[src] is None:
                    blocked = True
                    continue
                arrivals.append((theta[src] + n[rid], rid,
                                 certain[src] and rid not in uncertain_edges))
            if not arrivals:
                continue
            wa = score.points[p].wait is WaitBehavior.WA
            if wa and blocked:
                continue  # a static predecessor never executes
            arrivals.sort()
            val, rid, cert = arrivals[-1] if wa else arrivals[0]
            theta[p] = val
            det_edge[p] = rid
            certain[p] = all(c for _, _, c in arrivals) and cert
        else:
            members = set(scc)
            seeds = []
            aux_certain = True
            for p in scc:
                for rid, src in graph.in_edges[p]:
                    if src in members or theta[src] is None:
                        continue
                    val = theta[src] + n[rid]
                    cert = certain[src] and rid not in uncertain_edges
                    seeds.append((val, p, rid, cert))
            if graph.entry in members:
                seeds.append((0, graph.entry, None, True))
            if not seeds:
                continue
            # First traversal: earliest arrival within the region.
            dist: dict = {}
            heap = []
            for val, p, rid, cert in sorted(seeds):
                if p not in dist or val < dist[p]:
                    dist[p] = val
                    heapq.heappush(heap, (val, p, rid, cert))
            best: dict = {}
            while heap:
                val, p, rid, cert = heapq.heappop(heap)
                if p in best and best[p][0] <= val:
                    continue
                best[p] = (val, rid, cert)
                for rid2, t in graph.out_edges[p]:
                    if t not in members:
                        continue
                    nval = val + n[rid2]
                    ncert = cert and rid2 not in uncertain_edges
                    if t not in best or nval < best[t][0]:
                        heapq.heappush(heap, (nval, t, rid2, ncert))
            for p, (val, rid, cert) in best.items():
                theta[p] = val
                det_edge[p] = rid
                certain[p] = cert and aux_certain
    return _Arrivals(theta, certain, det_edge)


def _scc_rank(sccs, scc_of, graph: PointGraph, i: int):
    # Longest-chain rank in the condensation; stable and cheap on small graphs.
    memo: dict[int, int] = {}

    def rank(j: int) -> int:
        if j in memo:
            return memo[j]
        memo[j] = 0  # cycle guard; condensation is acyclic
        preds = {scc_of[src] for p in sccs[j] for _, src in graph.in_edges[p]
                 if scc_of[src] != j}
        memo[j] = 1 + max((rank(k) for k in preds), default=0)
        return memo[j]

    return (rank(i), sccs[i][0])


def assign_nominal_durations(score: Score) -> Score:
    """Fill every duration's nominal minimally; idempotent; may raise Infeasible.

    An already-present nominal acts as a lower bound, so an authored
    flexible nominal (e.g. a now-relation's evaluation window) survives
    recompilation instead of collapsing to the propagation minimum.
    """
    durs = _all_durations(score)
    n = {k: (d.nominal if d.nominal is not None and not d.random else d.min)
         for k, d in durs.items()}
    upper = {k: _upper(d) for k, d in durs.items()}
    uncertain_edges = {r.id for r in score.relations.values() if r.duration.random}
    graph = PointGraph.of(score)

    # A TO's duration and each of its direct start-to-end relations form one
    # equality group; soft raises never push any member past the group's
    # tightest upper bound, so only genuinely disjoint bounds are infeasible.
    groups: dict = {}
    for t in score.temporal_objects.values():
        group = [t.id] + [r.id for r in score.relations.values()
                          if r.p1 == t.start and r.p2 == t.end]
        uppers = [upper[k] for k in group if upper[k] is not None]
        cap = min(uppers) if uppers else None
        for k in group:
            groups[k] = (tuple(group), cap)

    def eff_upper(key: str):
        if key in groups:
            return groups[key][1]
        return upper[key]

    def try_raise(key: str, target: int) -> bool:
        # Soft raise, capped at what the duration and its group can follow.
        cap = eff_upper(key)
        if cap is not None:
            target = min(target, cap)
        if n[key] >= target:
            return False
        n[key] = target
        return True

    def sync_direct(t_id: str) -> bool:
        group = groups[t_id][0]
        if len(group) == 1:
            return False
        target = max(n[k] for k in group)
        changed = False
        for k in group:
            if n[k] < target:
                if upper[k] is not None and target > upper[k]:
                    raise InfeasibleError(
                        f"parallel rigid durations on {t_id} disagree: "
                        f"{k} is bounded by {upper[k]} but needs {target}")
                n[k] = target
                changed = True
        return changed

    def raise_chain(rid, delta: int, visited: set, protected=frozenset()) -> None:
        # Soft: push `delta` into the arrival path feeding `rid`, innermost
        # first.  Edges in `protected` determine the arrival being chased;
        # raising one of those would move the target too, so stop there.
        while rid is not None and delta > 0 and rid not in visited:
            if rid in protected:
                return
            visited.add(rid)
            cap = eff_upper(rid)
            if rid in uncertain_edges:
                slack = 0
            elif cap is None:
                slack = delta
            else:
                slack = max(0, cap - n[rid])
            take = min(delta, slack)
            n[rid] += take
            delta -= take
            src = score.relations[rid].p1
            rid = arr.det_edge.get(src)

    def det_path_edges(pid: str) -> set:
        out: set = set()
        rid = arr.det_edge.get(pid)
        while rid is not None and rid not in out:
            out.add(rid)
            rid = arr.det_edge.get(score.relations[rid].p1)
        return out

    limit = 8 + 2 * len(durs)
    for _ in range(limit):
        changed = False
        for t_id in sorted(score.temporal_objects):
            changed |= sync_direct(t_id)
        arr = _first_arrivals(score, graph, n, uncertain_edges)
        before = dict(n)
        for t_id in sorted(score.temporal_objects):
            t = score.to(t_id)
            ts, te = arr.theta.get(t.start), arr.theta.get(t.end)
            # Containment: a parent stretches over its children's static ends
            # when its bounds allow (a bounded parent that cannot is left to
            # the performance semantics: only flexible durations are
            # guaranteed coherent).
            if ts is not None:
                for c in t.children:
                    ce = arr.theta.get(score.to(c).end)
                    if ce is not None and ce - ts > n[t_id]:
                        try_raise(t_id, ce - ts)
            if ts is None or te is None:
                continue
            if not (arr.certain[t.start] and arr.certain[t.end]):
                continue
            gap = te - ts
            if n[t_id] < gap:
                try_raise(t_id, gap)
            elif n[t_id] > gap:
                raise_chain(arr.det_edge.get(t.end), n[t_id] - gap, set())
        # Soft arrival equalization at wait-for-all joins.
        for p in graph.nodes:
            if score.points[p].wait is not WaitBehavior.WA:
                continue
            arrivals = [(arr.theta[src] + n[rid], rid)
                        for rid, src in graph.in_edges[p] if arr.theta[src] is not None]
            if len(arrivals) < 2:
                continue
            target, max_rid = max(arrivals, key=lambda ar: (ar[0], ar[1]))
            protected = ({max_rid}
                         | det_path_edges(score.relations[max_rid].p1))
            for a, rid in arrivals:
                if a < target:
                    raise_chain(rid, target - a, set(), protected)
        changed |= (n != before)
        if not changed:
            break

    def filled(key: str, d: Duration) -> Duration:
        return replace(d, nominal=n[key])

    tos = {t.id: replace(t, duration=filled(t.id, t.duration))
           for t in score.temporal_objects.values()}
    rels = {r.id: replace(r, duration=filled(r.id, r.duration))
            for r in score.relations.values()}
    return Score(root=score.root, temporal_objects=tos, points=dict(score.points),
                 relations=rels)


# ---------------------------------------------------------------------------
# Date sets
# ---------------------------------------------------------------------------

def _nominals(score: Score) -> dict:
    out = {}
    for key, d in _all_durations(score).items():
        if d.nominal is None:
            raise UncompiledScoreError(f"duration of {key} has no nominal; compile first")
        out[key] = d.min if d.random else d.nominal
    return out


def _simple_cycles(graph: PointGraph, cap: int = 2000) -> list[list[tuple[str, str]]]:
    """All simple cycles as edge lists [(rid, src), ...]; graphs here are tiny."""
    cycles: list[list[tuple[str, str]]] = []
    nodes = graph.nodes
    pos = {p: i for i, p in enumerate(nodes)}

    def dfs(start: str, node: str, path_edges: list, on_path: set):
        for rid, t in graph.out_edges[node]:
            if t == start:
                cycles.append(path_edges + [(rid, node)])
                if len(cycles) > cap:
                    raise InfeasibleError("cycle enumeration exceeded bound")
            elif pos[t] > pos[start] and t not in on_path:
                on_path.add(t)
                dfs(start, t, path_edges + [(rid, node)], on_path)
                on_path.discard(t)

    for start in nodes:
        dfs(start, start, [], {start})
    return cycles


def _simple_path_sums(graph: PointGraph, n: dict, uncertain_edges: set,
                      target: str, cap: int = 20000):
    """All simple-path sums entry -> target with a certainty flag."""
    sums: set[int] = set()
    state = {"count": 0, "certain": True}

    def dfs(node: str, acc: int, cert: bool, on_path: set):
        state["count"] += 1
        if state["count"] > cap:
            raise InfeasibleError("path enumeration exceeded bound")
        if node == target:
            sums.add(acc)
            if not cert:
                state["certain"] = False
            return
        for rid, t in graph.out_edges[node]:
            if t in on_path:
                continue
            on_path.add(t)
            dfs(t, acc + n[rid], cert and rid not in uncertain_edges, on_path)
            on_path.discard(t)

    dfs(graph.entry, 0, True, {graph.entry})
    return sums, state["certain"]


def compute_nominal_dates(score: Score) -> EditionResult:
    """Date set per point, relative to the root start at tick 0."""
    n = _nominals(score)
    graph = PointGraph.of(score)
    uncertain_edges = {r.id for r in score.relations.values() if r.duration.random}
    arr = _first_arrivals(score, graph, n, uncertain_edges)

    cycles = _simple_cycles(graph)
    cycle_info = []
    for edges in cycles:
        members = {src for _, src in edges}
        period = sum(n[rid] for rid, _ in edges)
        cycle_info.append((members, period))

    # Forward/backward reachability per cycle: a point is associated when it
    # can reach the cycle, lies on it, or is reached from it.
    def reach_from(seeds: set) -> set:
        seen = set(seeds)
        frontier = list(seeds)
        while frontier:
            p = frontier.pop()
            for _, t in graph.out_edges[p]:
                if t not in seen:
                    seen.add(t)
                    frontier.append(t)
        return seen

    def reach_to(seeds: set) -> set:
        seen = set(seeds)
        frontier = list(seeds)
        while frontier:
            p = frontier.pop()
            for _, srcp in graph.in_edges[p]:
                if srcp not in seen:
                    seen.add(srcp)
                    frontier.append(srcp)
        return seen

    assoc_periods: dict = {p: set() for p in graph.nodes}
    for members, period in cycle_info:
        region = reach_from(members) | reach_to(members)
        for p in region:
            assoc_periods[p].add(period)

    dates: dict = {}
    for p in graph.nodes:
        if arr.theta[p] is None:
            dates[p] = DateSet.unknown()
            continue
        periods = sorted(assoc_periods[p])
        if len(periods) >= 2:
            dates[p] = DateSet.unknown()
        elif len(periods) == 1:
            dates[p] = DateSet.progression(arr.theta[p], periods[0])
        else:
            sums, cert = _simple_path_sums(graph, n, uncertain_edges, p)
            if not sums:
                dates[p] = DateSet.unknown()
            elif cert:
                dates[p] = DateSet.exact(sums)
            else:
                dates[p] = DateSet.at_least(min(sums))

    return EditionResult(dates=dates, nominal_durations=dict(sorted(n.items())),
                         warnings=analyze_rigidity(score))


def apply_edition(score: Score, result: EditionResult) -> Score:
    points = {pid: replace(p, dates=result.dates.get(pid, p.dates))
              for pid, p in score.points.items()}
    return Score(root=score.root, temporal_objects=dict(score.temporal_objects),
                 points=points, relations=dict(score.relations))


# ---------------------------------------------------------------------------
# Rigidity analysis
# ---------------------------------------------------------------------------

def _min_path(graph: PointGraph, n: dict, src: str, dst: str, banned: str):
    """Least simple-path weight src -> dst avoiding `banned`; None if unreachable."""
    if src == dst:
        return 0
    dist = {src: 0}
    heap = [(0, src)]
    while heap:
        d, p = heapq.heappop(heap)
        if p == dst:
            return d
        if d > dist.get(p, float("inf")):
            continue
        for rid, t in graph.out_edges[p]:
            if t == banned:
                continue
            nd = d + n[rid]
            if nd < dist.get(t, float("inf")):
                dist[t] = nd
                heapq.heappush(heap, (nd, t))
    return dist.get(dst)


def analyze_rigidity(score: Score) -> list:
    """Conservative detection of rigid durations that branching can break.

    A rigid or semi-rigid TO is flagged when some CH point's alternative
    branches impose different completion delays on the TO's end point:
    the TO's effective duration then depends on a choice that may not be
    made when it starts.
    """
    graph = PointGraph.of(score)
    n = {}
    for key, d in _all_durations(score).items():
        n[key] = (d.min if d.random else d.nominal) if d.nominal is not None else d.min
    warnings: list[RigidityWarning] = []

    ch_points = [p for p in graph.nodes if score.points[p].send is SendBehavior.CH]
    for t in sorted(score.temporal_objects.values(), key=lambda t: t.id):
        if t.duration.cls is DurationClass.FLEXIBLE:
            continue
        for q in ch_points:
            if q == t.end:
                continue  # the end already executed when this choice is made
            completions = []
            for rid, branch_target in graph.out_edges[q]:
                if branch_target == q:
                    continue
                de = _min_path(graph, n, branch_target, t.end, banned=q)
                if de is None:
                    continue
                de += n[rid]
                if t.start == q:
                    ds = 0
                else:
                    ds = _min_path(graph, n, branch_target, t.start, banned=q)
                    if ds is not None:
                        ds += n[rid]
                completions.append((de - ds) if ds is not None else de)
            if len(completions) >= 2 and len(set(completions)) >= 2:
                downstream = q == t.start or _min_path(graph, n, t.start, q, banned="") is not None
                warnings.append(RigidityWarning(
                    t.id, "choice-downstream" if downstream else "choice-upstream", q))
    return warnings


# ---------------------------------------------------------------------------
# One-call pipeline
# ---------------------------------------------------------------------------

def compile_score(score: Score, processes: ProcessRegistry | None = None,
                  strict: bool = True):
    """Validate, assign nominals, compute dates.

    Returns (compiled score with dates applied, EditionResult, diagnostics).
    Raises ValidationFailed when validation yields errors and strict is set.
    """
    diags = validate_score(score, processes)
    if strict and has_errors(diags):
        raise ValidationFailed(diags)
    compiled = assign_nominal_durations(score)
    result = compute_nominal_dates(compiled)
    return apply_edition(compiled, result), result, diags
