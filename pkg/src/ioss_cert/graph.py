"""Weighted switching graph and walk contractivity.

Vertices are subsystems.  A vertex carries its weight (``-|lambda|`` for IOSS
subsystems, ``+|lambda|`` otherwise) and its dwell bounds; an edge ``(p, q)``
is an admissible switch with weight ``ln mu_pq >= 0``.  For a walk
``v0, ..., vn`` and dwell times ``D0, ..., D(n-1)`` the Xi-sum is::

    sum_i w(v_i) * D_i + sum_i w(v_i, v_{i+1})

The sum is affine in each ``D_i`` over a box, so its supremum sits at the
corner ``D_i = delta`` on stable vertices and ``D_i = Delta`` on unstable
ones.  :func:`xi_worst` evaluates that corner.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Iterator, Mapping, NamedTuple, Sequence

from .model import SpecError, SystemSpec, VertexId, validate

DEFAULT_TOLERANCE = 1e-9


class GraphError(ValueError):
    pass


class InvalidWalkError(GraphError):
    pass


@dataclass(frozen=True)
class Vertex:
    id: VertexId
    w: float
    delta: float
    Delta: float

    @property
    def stable(self) -> bool:
        return self.w < 0

    @property
    def worst_dwell(self) -> float:
        return self.delta if self.w < 0 else self.Delta


class StabilityGraph:
    """Immutable vertex- and edge-weighted digraph.

    Vertex order is the declaration order and fixes every deterministic
    ordering downstream (successor lists, cycle roots, lexicographic sorts).
    """

    def __init__(self, vertices: Sequence[Vertex], edges: Mapping[tuple[VertexId, VertexId], float]):
        self._vertices = tuple(vertices)
        self._index = {v.id: i for i, v in enumerate(self._vertices)}
        if len(self._index) != len(self._vertices):
            raise GraphError("duplicate vertex id")
        for v in self._vertices:
            if v.w == 0 or not math.isfinite(v.w):
                raise GraphError(f"vertex {v.id!r}: weight must be finite and nonzero")
            if not (0 < v.delta <= v.Delta):
                raise GraphError(f"vertex {v.id!r}: need 0 < delta <= Delta")
        es = {}
        for (a, b), w in edges.items():
            if a not in self._index or b not in self._index:
                raise GraphError(f"edge {a!r}->{b!r} has an unknown endpoint")
            if a == b:
                raise GraphError(f"self-loop on {a!r}")
            if not (w >= 0 and math.isfinite(w)):
                raise GraphError(f"edge {a!r}->{b!r}: weight must be finite and >= 0, got {w!r}")
            es[(a, b)] = float(w)
        key = self._index.__getitem__
        self._edges = dict(sorted(es.items(), key=lambda kv: (key(kv[0][0]), key(kv[0][1]))))
        succ: dict[VertexId, list[VertexId]] = {v.id: [] for v in self._vertices}
        for a, b in self._edges:
            succ[a].append(b)
        self._succ = {k: tuple(v) for k, v in succ.items()}

    @classmethod
    def from_weights(
        cls,
        vertex_weights: Mapping[VertexId, float],
        dwell: Mapping[VertexId, tuple[float, float]],
        edge_weights: Mapping[tuple[VertexId, VertexId], float],
    ) -> "StabilityGraph":
        vs = [Vertex(v, float(w), *map(float, dwell[v])) for v, w in vertex_weights.items()]
        return cls(vs, edge_weights)

    @property
    def vertices(self) -> tuple[Vertex, ...]:
        return self._vertices

    @property
    def ids(self) -> tuple[VertexId, ...]:
        return tuple(v.id for v in self._vertices)

    @property
    def edges(self) -> dict[tuple[VertexId, VertexId], float]:
        return dict(self._edges)

    def __len__(self) -> int:
        return len(self._vertices)

    def __contains__(self, vid) -> bool:
        return vid in self._index

    def vertex(self, vid: VertexId) -> Vertex:
        try:
            return self._vertices[self._index[vid]]
        except KeyError:
            raise GraphError(f"unknown vertex {vid!r}") from None

    def index(self, vid: VertexId) -> int:
        return self._index[vid]

    def w(self, vid: VertexId) -> float:
        return self.vertex(vid).w

    def edge_w(self, a: VertexId, b: VertexId) -> float:
        try:
            return self._edges[(a, b)]
        except KeyError:
            raise InvalidWalkError(f"no admissible switch {a!r}->{b!r}") from None

    def has_edge(self, a: VertexId, b: VertexId) -> bool:
        return (a, b) in self._edges

    def successors(self, vid: VertexId) -> tuple[VertexId, ...]:
        return self._succ[vid]

    def sort_key(self, walk: "Walk | Sequence[VertexId]") -> tuple[int, ...]:
        vs = walk.vertices if isinstance(walk, Walk) else walk
        return tuple(self._index[v] for v in vs)

    def check_walk(self, walk: "Walk") -> None:
        if not walk.vertices:
            raise InvalidWalkError("empty walk")
        for v in walk.vertices:
            if v not in self._index:
                raise InvalidWalkError(f"unknown vertex {v!r} in walk {walk}")
        for a, b in walk.edges():
            if (a, b) not in self._edges:
                raise InvalidWalkError(f"walk {walk} uses inadmissible switch {a!r}->{b!r}")

    def __repr__(self) -> str:
        return f"StabilityGraph({len(self._vertices)} vertices, {len(self._edges)} edges)"


@dataclass(frozen=True)
class Walk:
    """Finite vertex sequence; length counts vertices with repetition."""

    vertices: tuple[VertexId, ...]

    def __init__(self, vertices: Iterable[VertexId]):
        object.__setattr__(self, "vertices", tuple(vertices))

    def __len__(self) -> int:
        return len(self.vertices)

    def __iter__(self) -> Iterator[VertexId]:
        return iter(self.vertices)

    def __getitem__(self, i):
        return self.vertices[i]

    def __str__(self) -> str:
        return ",".join(map(str, self.vertices))

    @property
    def first(self) -> VertexId:
        return self.vertices[0]

    @property
    def last(self) -> VertexId:
        return self.vertices[-1]

    @property
    def n_edges(self) -> int:
        return max(len(self.vertices) - 1, 0)

    def edges(self) -> list[tuple[VertexId, VertexId]]:
        vs = self.vertices
        return list(zip(vs[:-1], vs[1:]))

    def vertex_set(self) -> frozenset:
        return frozenset(self.vertices)

    def is_closed(self) -> bool:
        """Returns to its start and does not visit the start in between."""
        vs = self.vertices
        return len(vs) >= 2 and vs[0] == vs[-1] and vs[0] not in vs[1:-1]

    def is_cycle(self) -> bool:
        interior = self.vertices[1:-1]
        return self.is_closed() and len(set(interior)) == len(interior)

    def is_simple(self) -> bool:
        vs = self.vertices
        return len(vs) >= 2 and len(set(vs)) == len(vs)

    def concat(self, other: "Walk") -> "Walk":
        if self.last != other.first:
            raise InvalidWalkError(f"cannot concatenate {self} and {other}: endpoints differ")
        return Walk(self.vertices + other.vertices[1:])

    def rotate(self, k: int) -> "Walk":
        """Re-root a cycle at its ``k``-th vertex."""
        core = self.vertices[:-1]
        k %= len(core)
        rot = core[k:] + core[:k]
        return Walk(rot + rot[:1])


def build_graph(spec: SystemSpec) -> StabilityGraph:
    """Vertex weights ``-/+|lambda_p|`` by stability class, edge weights ``ln mu_pq``."""
    validate(spec)
    vs = [Vertex(s.id, -s.lambda_abs if s.stable else s.lambda_abs, s.delta, s.Delta) for s in spec.subsystems]
    es = {}
    for e in spec.edges:
        if e.mu < 1:
            raise SpecError("edges", f"mu={e.mu!r} < 1")
        es[(e.src, e.dst)] = math.log(e.mu)
    return StabilityGraph(vs, es)


class Verdict(NamedTuple):
    verdict: bool
    margin: float


def xi_of(graph: StabilityGraph, walk: Walk, dwell: Sequence[float]) -> float:
    """Xi-sum of ``walk`` for a concrete dwell assignment (one per non-final vertex)."""
    graph.check_walk(walk)
    if len(dwell) != walk.n_edges:
        raise InvalidWalkError(f"walk {walk} needs {walk.n_edges} dwell times, got {len(dwell)}")
    total = 0.0
    for i, (a, b) in enumerate(walk.edges()):
        v = graph.vertex(a)
        D = dwell[i]
        if not (v.delta <= D <= v.Delta):
            raise InvalidWalkError(f"dwell {D!r} at position {i} outside [{v.delta}, {v.Delta}] of vertex {a!r}")
        total += v.w * D + graph.edge_w(a, b)
    return total


def worst_dwell(graph: StabilityGraph, walk: Walk) -> list[float]:
    return [graph.vertex(a).worst_dwell for a in walk.vertices[:-1]]


def xi_worst(graph: StabilityGraph, walk: Walk) -> float:
    """Supremum of the Xi-sum over all admissible dwell assignments."""
    graph.check_walk(walk)
    total = 0.0
    for a, b in walk.edges():
        v = graph.vertex(a)
        total += v.w * v.worst_dwell + graph.edge_w(a, b)
    return total


def is_contractive(graph: StabilityGraph, walk: Walk, tolerance: float = DEFAULT_TOLERANCE) -> Verdict:
    if tolerance < 0:
        raise ValueError("tolerance must be >= 0")
    xi = xi_worst(graph, walk)
    return Verdict(xi <= -tolerance, -xi)


def is_jointly_contractive(
    graph: StabilityGraph, w1: Walk, w2: Walk, tolerance: float = DEFAULT_TOLERANCE
) -> Verdict:
    """Check that the Xi-sums of ``w1`` then ``w2`` total negative for every dwell choice.

    A true verdict means ``w1.concat(w2)`` is contractive.
    """
    if tolerance < 0:
        raise ValueError("tolerance must be >= 0")
    if w1.last != w2.first:
        raise InvalidWalkError(f"{w1} ends at {w1.last!r} but {w2} starts at {w2.first!r}")
    xi = xi_worst(graph, w1) + xi_worst(graph, w2)
    return Verdict(xi <= -tolerance, -xi)


def distinct(w1: Walk, w2: Walk) -> bool:
    """Some vertex appears in exactly one of the two walks."""
    return bool(w1.vertex_set() ^ w2.vertex_set())


__all__ = [
    "DEFAULT_TOLERANCE",
    "GraphError",
    "InvalidWalkError",
    "Vertex",
    "StabilityGraph",
    "Walk",
    "Verdict",
    "build_graph",
    "xi_of",
    "xi_worst",
    "worst_dwell",
    "is_contractive",
    "is_jointly_contractive",
    "distinct",
]
