"""Cycle and simple-walk enumeration, walk decompositions."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

from .graph import (
    DEFAULT_TOLERANCE,
    GraphError,
    InvalidWalkError,
    StabilityGraph,
    Walk,
    xi_of,
    xi_worst,
)
from .model import VertexId

DEFAULT_MAX_CYCLES = 10**6


class CycleCapError(GraphError):
    def __init__(self, cap: int):
        self.cap = cap
        super().__init__(f"more than {cap} elementary cycles; raise the cap to enumerate them all")


class DecompositionError(RuntimeError):
    """A walk on a certified graph failed to split into contractive blocks."""


@dataclass
class CycleSet:
    """Elementary cycles, listed once per root vertex.

    ``rooted[v]`` holds every cycle through ``v`` rotated to start and end at
    ``v``; ``unique`` holds each cycle once, rooted at its first vertex in
    declaration order.
    """

    rooted: dict[VertexId, list[Walk]] = field(default_factory=dict)
    unique: list[Walk] = field(default_factory=list)

    def __getitem__(self, v: VertexId) -> list[Walk]:
        return self.rooted[v]

    def roots(self) -> list[VertexId]:
        return [v for v, cs in self.rooted.items() if cs]

    def total_rooted(self) -> int:
        return sum(len(cs) for cs in self.rooted.values())


def _strong_component(graph: StabilityGraph, s: VertexId, allowed: set) -> set:
    fwd = {s}
    stack = [s]
    while stack:
        a = stack.pop()
        for b in graph.successors(a):
            if b in allowed and b not in fwd:
                fwd.add(b)
                stack.append(b)
    pred: dict[VertexId, list[VertexId]] = {}
    for a in fwd:
        for b in graph.successors(a):
            if b in fwd:
                pred.setdefault(b, []).append(a)
    back = {s}
    stack = [s]
    while stack:
        b = stack.pop()
        for a in pred.get(b, ()):
            if a not in back:
                back.add(a)
                stack.append(a)
    return fwd & back


def _johnson_from(graph: StabilityGraph, s: VertexId, comp: set, out: list, cap: int) -> None:
    blocked: set = set()
    B: dict[VertexId, set] = {v: set() for v in comp}
    path: list[VertexId] = [s]

    def unblock(u):
        todo = [u]
        while todo:
            x = todo.pop()
            if x in blocked:
                blocked.discard(x)
                todo.extend(B[x])
                B[x].clear()

    def circuit(v) -> bool:
        found = False
        blocked.add(v)
        for w in graph.successors(v):
            if w not in comp:
                continue
            if w == s:
                out.append(tuple(path) + (s,))
                if len(out) > cap:
                    raise CycleCapError(cap)
                found = True
            elif w not in blocked:
                path.append(w)
                if circuit(w):
                    found = True
                path.pop()
        if found:
            unblock(v)
        else:
            for w in graph.successors(v):
                if w in comp:
                    B[w].add(v)
        return found

    circuit(s)


def enumerate_cycles(graph: StabilityGraph, max_cycles: int = DEFAULT_MAX_CYCLES) -> CycleSet:
    """All elementary cycles, per root, in lexicographic vertex order.

    Johnson's circuit search run once per start vertex on the strongly
    connected piece of the graph restricted to later vertices; each cycle is
    thus found exactly once, rooted at its earliest vertex, and then rotated
    onto every other vertex it visits.

    Raises
    ------
    CycleCapError
        When more than ``max_cycles`` distinct cycles exist.
    """
    ids = graph.ids
    found: list[tuple] = []
    for i, s in enumerate(ids):
        allowed = set(ids[i:])
        comp = _strong_component(graph, s, allowed)
        if len(comp) > 1:
            _johnson_from(graph, s, comp, found, max_cycles)
    unique = sorted((Walk(c) for c in found), key=graph.sort_key)
    rooted: dict[VertexId, list[Walk]] = {v: [] for v in ids}
    for c in unique:
        for k in range(c.n_edges):
            r = c.rotate(k)
            rooted[r.first].append(r)
    for v in ids:
        rooted[v].sort(key=graph.sort_key)
    return CycleSet(rooted, unique)


def enumerate_simple_walks(graph: StabilityGraph, u: VertexId, v: VertexId) -> list[Walk]:
    """Every walk from ``u`` to ``v`` with pairwise distinct vertices."""
    if u == v:
        raise ValueError("simple walks need distinct endpoints")
    graph.vertex(u)
    graph.vertex(v)
    out: list[Walk] = []
    path = [u]
    on_path = {u}

    def dfs(a):
        for b in graph.successors(a):
            if b == v:
                out.append(Walk(path + [v]))
            elif b not in on_path:
                path.append(b)
                on_path.add(b)
                dfs(b)
                on_path.discard(b)
                path.pop()

    dfs(u)
    out.sort(key=graph.sort_key)
    return out


def decompose_closed_walk(walk: Walk | Sequence[VertexId]) -> list[Walk]:
    """Split a walk that returns to its start into elementary cycles.

    Vertices are pushed on a stack; a revisit pops the loop it closes.  The
    cycles come out in the order they close, and splicing each one back at
    the position where its root sits restores the input.  Edges are
    preserved as a multiset.
    """
    vs = tuple(walk.vertices if isinstance(walk, Walk) else walk)
    if len(vs) < 3 or vs[0] != vs[-1]:
        raise InvalidWalkError(f"{','.join(map(str, vs))} is not a closed walk")
    stack: list[VertexId] = []
    pos: dict[VertexId, int] = {}
    cycles: list[Walk] = []
    for x in vs:
        if x in pos:
            k = pos[x]
            cyc = stack[k:] + [x]
            for y in stack[k + 1 :]:
                del pos[y]
            del stack[k + 1 :]
            cycles.append(Walk(cyc))
        else:
            pos[x] = len(stack)
            stack.append(x)
    if len(stack) != 1:
        raise InvalidWalkError("closed walk did not reduce to its root")  # unreachable for vs[0] == vs[-1]
    return cycles


@dataclass
class PrefixDecomposition:
    segments: list[Walk]
    residual: Walk
    offsets: list[int]
    segment_xi: list[float]
    segment_margin: list[float]

    def reconstruct(self) -> Walk:
        if not self.segments:
            return self.residual
        out = self.segments[0]
        for s in self.segments[1:]:
            out = out.concat(s)
        if len(self.residual):
            out = out.concat(self.residual)
        return out


def decompose_prefix(
    graph: StabilityGraph,
    walk: Walk,
    dwell: Sequence[float] | None = None,
    tolerance: float = DEFAULT_TOLERANCE,
) -> PrefixDecomposition:
    """Split a finite walk into contractive blocks plus an unfinished tail.

    Starting from an anchor, scan until the first repeated vertex.  The
    stretch from the anchor up to that repeat is either a cycle at the anchor
    or a simple walk into a cycle it does not otherwise touch; under the
    certified conditions both are contractive.  The repeat becomes the next
    anchor.  What is left after the last block has no repeated vertex, so it
    is shorter than the vertex count.

    ``residual`` is empty when the last block ends on the final vertex;
    otherwise it starts at the last anchor.  ``segment_xi`` holds the actual
    Xi-sum per block when ``dwell`` is given, else the worst case.

    Raises
    ------
    DecompositionError
        If a block is not contractive, i.e. the graph was not certified.
    """
    graph.check_walk(walk)
    vs = walk.vertices
    if dwell is not None and len(dwell) < len(vs) - 1:
        raise InvalidWalkError(f"need {len(vs) - 1} dwell times, got {len(dwell)}")
    segments: list[Walk] = []
    offsets: list[int] = []
    seg_xi: list[float] = []
    seg_margin: list[float] = []
    anchor = 0
    seen: dict[VertexId, int] = {vs[0]: 0}
    for j in range(1, len(vs)):
        x = vs[j]
        if x in seen:
            seg = Walk(vs[anchor : j + 1])
            worst = xi_worst(graph, seg)
            if not worst <= -tolerance:
                raise DecompositionError(
                    f"block {seg} at offset {anchor} has worst-case Xi {worst:.6g} >= -{tolerance:g}"
                )
            segments.append(seg)
            offsets.append(anchor)
            seg_margin.append(-worst)
            if dwell is not None:
                seg_xi.append(xi_of(graph, seg, list(dwell[anchor:j])))
            else:
                seg_xi.append(worst)
            anchor = j
            seen = {x: j}
        else:
            seen[x] = j
    residual = Walk(vs[anchor:]) if anchor < len(vs) - 1 or not segments else Walk(())
    return PrefixDecomposition(segments, residual, offsets, seg_xi, seg_margin)


__all__ = [
    "DEFAULT_MAX_CYCLES",
    "CycleCapError",
    "DecompositionError",
    "CycleSet",
    "enumerate_cycles",
    "enumerate_simple_walks",
    "decompose_closed_walk",
    "decompose_prefix",
    "PrefixDecomposition",
]
