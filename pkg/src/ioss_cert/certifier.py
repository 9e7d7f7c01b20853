"""Graph certificate for IOSS under all admissible switching signals.

Two conditions are checked on the switching graph:

* every elementary cycle is contractive (a closed walk splits into cycles,
  so this covers closed walks of any length);
* for each cycle rooted at ``v`` and each vertex ``u`` the cycle misses,
  every simple walk ``u -> v`` followed by the cycle is contractive.

Contractivity is decided at the worst-case dwell corner (see
:func:`ioss_cert.graph.xi_worst`), so both checks are finite.  A maximum
cycle mean on the reweighted graph serves as an independent cross-check of
the first condition.
"""

from __future__ import annotations

import enum
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Any

from .enumeration import (
    DEFAULT_MAX_CYCLES,
    CycleCapError,
    CycleSet,
    enumerate_cycles,
    enumerate_simple_walks,
)
from .graph import DEFAULT_TOLERANCE, StabilityGraph, Walk, build_graph, xi_worst
from .model import SystemSpec, VertexId

THREADS_ENV = "IOSS_CERTIFY_THREADS"


class Overall(str, enum.Enum):
    CERTIFIED = "CERTIFIED"
    REFUTED_C1 = "REFUTED_C1"
    REFUTED_C2 = "REFUTED_C2"
    INCONCLUSIVE_CAP = "INCONCLUSIVE_CAP"


class ReducedGraph:
    """Same vertices and edges, with the worst-case dwell of the tail folded into each edge."""

    def __init__(self, graph: StabilityGraph):
        self.graph = graph
        self.weights: dict[tuple[VertexId, VertexId], float] = {}
        for (a, b), w in graph.edges.items():
            v = graph.vertex(a)
            self.weights[(a, b)] = w + v.w * v.worst_dwell

    @property
    def ids(self) -> tuple[VertexId, ...]:
        return self.graph.ids

    def walk_weight(self, walk: Walk) -> float:
        return sum(self.weights[e] for e in walk.edges())


def build_reduced_graph(graph: StabilityGraph) -> ReducedGraph:
    return ReducedGraph(graph)


def max_cycle_mean(reduced: ReducedGraph) -> float | None:
    """Largest mean edge weight over all cycles (Karp); ``None`` if acyclic.

    Every vertex is a start (``D_0 = 0`` everywhere), so graphs need not be
    strongly connected.
    """
    ids = reduced.ids
    n = len(ids)
    idx = {v: i for i, v in enumerate(ids)}
    edges = [(idx[a], idx[b], w) for (a, b), w in reduced.weights.items()]
    NEG = -math.inf
    D = [[0.0] * n]
    for k in range(1, n + 1):
        prev = D[-1]
        cur = [NEG] * n
        for a, b, w in edges:
            if prev[a] != NEG and prev[a] + w > cur[b]:
                cur[b] = prev[a] + w
        D.append(cur)
    best = None
    for v in range(n):
        if D[n][v] == NEG:
            continue
        worst = math.inf
        for k in range(n):
            if D[k][v] != NEG:
                worst = min(worst, (D[n][v] - D[k][v]) / (n - k))
        if best is None or worst > best:
            best = worst
    return best


@dataclass
class CycleCheck:
    root: VertexId
    cycle: Walk
    xi_worst: float
    margin: float
    verdict: bool


@dataclass
class PairCheck:
    root: VertexId
    simple_walk: Walk
    cycle: Walk
    joint_xi: float
    margin: float
    verdict: bool


@dataclass
class Precheck:
    max_cycle_mean: float | None
    consistent: bool
    note: str = ""


@dataclass
class CertificationReport:
    overall: Overall
    tolerance: float
    graph: StabilityGraph
    per_cycle: list[CycleCheck] = field(default_factory=list)
    per_pair: list[PairCheck] = field(default_factory=list)
    precheck: Precheck | None = None
    warnings: list[str] = field(default_factory=list)
    max_cycles: int = DEFAULT_MAX_CYCLES
    # smallest margin over all blocks a certified walk can split into
    min_block_margin: float | None = None
    residual_bound: int | None = None
    psi2_bound: float | None = None

    @property
    def c1_ok(self) -> bool:
        return all(c.verdict for c in self.per_cycle)

    @property
    def c2_ok(self) -> bool:
        return all(p.verdict for p in self.per_pair)

    def witnesses(self) -> list[CycleCheck | PairCheck]:
        return [c for c in self.per_cycle if not c.verdict] + [p for p in self.per_pair if not p.verdict]

    def to_dict(self) -> dict[str, Any]:
        g = self.graph
        return {
            "overall": self.overall.value,
            "tolerance": self.tolerance,
            "max_cycles": self.max_cycles,
            "vertices": [
                {"id": v.id, "w": v.w, "delta": v.delta, "Delta": v.Delta, "stable": v.stable}
                for v in g.vertices
            ],
            "edges": [{"from": a, "to": b, "w": w} for (a, b), w in g.edges.items()],
            "precheck": None
            if self.precheck is None
            else {
                "max_cycle_mean": self.precheck.max_cycle_mean,
                "consistent": self.precheck.consistent,
                "note": self.precheck.note,
            },
            "per_cycle": [
                {"root": c.root, "cycle": list(c.cycle), "xi_worst": c.xi_worst, "margin": c.margin, "verdict": c.verdict}
                for c in self.per_cycle
            ],
            "per_pair": [
                {
                    "root": p.root,
                    "simple_walk": list(p.simple_walk),
                    "cycle": list(p.cycle),
                    "joint_xi": p.joint_xi,
                    "margin": p.margin,
                    "verdict": p.verdict,
                }
                for p in self.per_pair
            ],
            "min_block_margin": self.min_block_margin,
            "residual_bound": self.residual_bound,
            "psi2_bound": self.psi2_bound,
            "warnings": list(self.warnings),
        }


def _threads() -> int:
    try:
        return max(1, int(os.environ.get(THREADS_ENV, "1")))
    except ValueError:
        return 1


def _canonical(graph: StabilityGraph, cycle: Walk) -> Walk:
    k = min(range(cycle.n_edges), key=lambda i: graph.index(cycle[i]))
    return cycle.rotate(k)


def check_C1(graph: StabilityGraph, cycles: CycleSet, tolerance: float = DEFAULT_TOLERANCE) -> list[CycleCheck]:
    """One verdict per rooted cycle; Xi is computed once per underlying cycle."""
    cache = {c: xi_worst(graph, c) for c in cycles.unique}
    out = []
    for v, cs in cycles.rooted.items():
        for c in cs:
            xi = cache[_canonical(graph, c)]
            out.append(CycleCheck(v, c, xi, -xi, xi <= -tolerance))
    return out


def check_C2(graph: StabilityGraph, cycles: CycleSet, tolerance: float = DEFAULT_TOLERANCE) -> list[PairCheck]:
    """Pair every rooted cycle with the simple walks entering its root from outside it."""
    cyc_xi = {c: xi_worst(graph, c) for c in cycles.unique}
    walk_cache: dict[tuple[VertexId, VertexId], list[tuple[Walk, float]]] = {}

    def walks_into(u, v):
        if (u, v) not in walk_cache:
            walk_cache[(u, v)] = [(w, xi_worst(graph, w)) for w in enumerate_simple_walks(graph, u, v)]
        return walk_cache[(u, v)]

    jobs = []
    for v, cs in cycles.rooted.items():
        for c in cs:
            missing = [u for u in graph.ids if u not in c.vertex_set()]
            jobs.append((v, c, missing))

    def run(job):
        v, c, missing = job
        xc = cyc_xi[_canonical(graph, c)]
        res = []
        for u in missing:
            for w, xw in walks_into(u, v):
                joint = xw + xc
                res.append(PairCheck(v, w, c, joint, -joint, joint <= -tolerance))
        return res

    # warm the cache serially so worker threads only read it
    for v, c, missing in jobs:
        for u in missing:
            walks_into(u, v)
    n = _threads()
    if n > 1 and len(jobs) > 1:
        with ThreadPoolExecutor(n) as pool:
            chunks = list(pool.map(run, jobs))
    else:
        chunks = [run(j) for j in jobs]
    return [p for chunk in chunks for p in chunk]


def _psi2_bound(graph: StabilityGraph, eps: float) -> float:
    """Run-independent ceiling on psi2 for a certified graph.

    Any walk splits into blocks of at most ``n`` edges, each with worst-case
    Xi at most ``-eps``, plus fewer than ``n`` leftover edges.  So the
    exponent of a psi2 term whose tail spans ``L`` edges is at most
    ``kappa - eps * ceil((L - n + 1) / n)``; at most ``n + 1`` tails get no
    block and ``n`` tails share each block count, which sums to the bound.
    """
    n = len(graph)
    w_hat = max((graph.vertex(a).w * graph.vertex(a).worst_dwell + w for (a, _), w in graph.edges.items()), default=0.0)
    max_edge = max(graph.edges.values(), default=0.0)
    tail = max(max(v.w * v.Delta, 0.0) for v in graph.vertices)
    kappa = max_edge + (n - 1) * max(w_hat, 0.0) + tail
    factor = 0.0
    for v in graph.vertices:
        lam = -v.w
        if lam > 0:
            factor = max(factor, 1.0 / lam)
        else:
            factor = max(factor, math.expm1(-lam * v.Delta) / -lam)
    return math.exp(kappa) * factor * (n + 1) / (-math.expm1(-eps))


def certify(
    spec: SystemSpec | StabilityGraph,
    tolerance: float = DEFAULT_TOLERANCE,
    max_cycles: int = DEFAULT_MAX_CYCLES,
) -> CertificationReport:
    """Build the graph, enumerate, pre-check, then decide both conditions."""
    graph = spec if isinstance(spec, StabilityGraph) else build_graph(spec)
    report = CertificationReport(Overall.CERTIFIED, tolerance, graph, max_cycles=max_cycles)
    mcm = max_cycle_mean(build_reduced_graph(graph))
    try:
        cycles = enumerate_cycles(graph, max_cycles)
    except CycleCapError as exc:
        report.overall = Overall.INCONCLUSIVE_CAP
        report.precheck = Precheck(mcm, True, "cycle enumeration capped; pre-check only")
        report.warnings.append(str(exc))
        return report
    report.per_cycle = check_C1(graph, cycles, tolerance)
    report.per_pair = check_C2(graph, cycles, tolerance)

    c1 = report.c1_ok
    if mcm is None:
        consistent = not cycles.unique
        note = "acyclic"
    else:
        consistent = c1 == (mcm < 0)
        note = ""
        if not consistent:
            worst = max(c.xi_worst for c in report.per_cycle)
            if -tolerance < worst <= 0 or abs(mcm) <= tolerance:
                consistent = True
                note = "cycle sums within tolerance of zero"
    report.precheck = Precheck(mcm, consistent, note)
    if not consistent:
        report.warnings.append(
            f"internal inconsistency: max cycle mean {mcm!r} disagrees with per-cycle verdict {c1}"
        )

    if not cycles.unique:
        report.warnings.append(
            "graph has no cycles: every admissible switching signal switches finitely often; "
            "certified vacuously"
        )
    if not c1:
        report.overall = Overall.REFUTED_C1
    elif not report.c2_ok:
        report.overall = Overall.REFUTED_C2
    else:
        margins = [c.margin for c in report.per_cycle] + [p.margin for p in report.per_pair]
        if margins:
            report.min_block_margin = min(margins)
            report.residual_bound = len(graph)
            report.psi2_bound = _psi2_bound(graph, report.min_block_margin)
    return report


__all__ = [
    "Overall",
    "ReducedGraph",
    "build_reduced_graph",
    "max_cycle_mean",
    "CycleCheck",
    "PairCheck",
    "Precheck",
    "CertificationReport",
    "check_C1",
    "check_C2",
    "certify",
    "THREADS_ENV",
]
