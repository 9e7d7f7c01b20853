"""Admissible switching signals: sampling, validation, statistics."""

from __future__ import annotations

import bisect
import json
import random
from collections import defaultdict
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

from .graph import GraphError, StabilityGraph, Walk
from .model import VertexId

# slack for dwell comparisons on instants rebuilt from cumulative sums
DWELL_SLACK = 1e-9


class DeadEndError(GraphError):
    def __init__(self, vertex: VertexId, time: float):
        self.vertex = vertex
        self.time = time
        super().__init__(f"vertex {vertex!r} has no admissible successor but must be left before t={time:g}")


class MalformedSignalError(ValueError):
    pass


@dataclass(frozen=True)
class SwitchingSignal:
    """Piecewise-constant, right-continuous signal on ``[0, horizon]``.

    ``indices[i]`` is active on ``[instants[i], instants[i+1])``; the last one
    stays active up to the horizon.
    """

    instants: tuple[float, ...]
    indices: tuple[VertexId, ...]
    horizon: float

    def __post_init__(self):
        if len(self.instants) != len(self.indices) or not self.instants:
            raise MalformedSignalError("instants and indices must be non-empty and of equal length")
        if self.instants[0] != 0.0:
            raise MalformedSignalError(f"first instant must be 0, got {self.instants[0]!r}")
        for i in range(1, len(self.instants)):
            if not self.instants[i] > self.instants[i - 1]:
                raise MalformedSignalError(f"instants not strictly increasing at index {i}")
        if self.instants[-1] > self.horizon:
            raise MalformedSignalError("last instant lies beyond the horizon")

    @property
    def n_switches(self) -> int:
        return len(self.instants) - 1

    def walk(self) -> Walk:
        return Walk(self.indices)

    def dwells(self) -> list[float]:
        """Completed dwell durations, one per switch."""
        t = self.instants
        return [t[i + 1] - t[i] for i in range(len(t) - 1)]

    def segment_end(self, i: int) -> float:
        return self.instants[i + 1] if i + 1 < len(self.instants) else self.horizon

    def index_at(self, t: float) -> VertexId:
        if t < 0 or t > self.horizon:
            raise ValueError(f"t={t!r} outside [0, {self.horizon}]")
        return self.indices[bisect.bisect_right(self.instants, t) - 1]

    def position_at(self, t: float) -> int:
        return bisect.bisect_right(self.instants, t) - 1

    def truncate(self, horizon: float) -> "SwitchingSignal":
        k = bisect.bisect_right(self.instants, horizon)
        return SwitchingSignal(self.instants[:k], self.indices[:k], horizon)


@dataclass
class Violation:
    index: int
    kind: str
    message: str


@dataclass
class SignalCheck:
    ok: bool
    violations: list[Violation] = field(default_factory=list)


@dataclass
class SwitchStats:
    N: int
    T: dict[VertexId, float]
    N_pq: dict[tuple[VertexId, VertexId], int]


def sample_signal(graph: StabilityGraph, start: VertexId, horizon: float, seed: int = 0) -> SwitchingSignal:
    """Random admissible signal: uniform successor, uniform dwell in ``[delta, Delta]``."""
    if horizon <= 0:
        raise ValueError("horizon must be positive")
    rng = random.Random(seed)
    cur = start
    graph.vertex(cur)
    t = 0.0
    instants = [0.0]
    indices = [cur]
    while True:
        v = graph.vertex(cur)
        nxt_t = t + rng.uniform(v.delta, v.Delta)
        if nxt_t >= horizon:
            break
        succ = graph.successors(cur)
        if not succ:
            raise DeadEndError(cur, nxt_t)
        cur = succ[rng.randrange(len(succ))]
        t = nxt_t
        instants.append(t)
        indices.append(cur)
    return SwitchingSignal(tuple(instants), tuple(indices), float(horizon))


def validate_signal(graph: StabilityGraph, signal: SwitchingSignal) -> SignalCheck:
    """Report every inadmissible switch and every dwell outside its bounds."""
    out: list[Violation] = []
    ts, ix = signal.instants, signal.indices
    for i, v in enumerate(ix):
        if v not in graph:
            out.append(Violation(i, "vertex", f"unknown subsystem {v!r} at index {i}"))
    for i in range(len(ix) - 1):
        a, b = ix[i], ix[i + 1]
        if a in graph and b in graph and not graph.has_edge(a, b):
            out.append(Violation(i, "edge", f"switch {a!r}->{b!r} at index {i} is not admissible"))
    for i in range(len(ix)):
        if ix[i] not in graph:
            continue
        vx = graph.vertex(ix[i])
        D = signal.segment_end(i) - ts[i]
        complete = i + 1 < len(ix)
        if complete and D < vx.delta - DWELL_SLACK:
            out.append(Violation(i, "dwell", f"dwell {D:g} below delta={vx.delta:g} at index {i}"))
        if D > vx.Delta + DWELL_SLACK:
            out.append(Violation(i, "dwell", f"dwell {D:g} above Delta={vx.Delta:g} at index {i}"))
    return SignalCheck(not out, out)


def stats(signal: SwitchingSignal, s: float, t: float) -> SwitchStats:
    """Switch counts on ``(s, t]`` and activation time per subsystem."""
    if not (0 <= s < t <= signal.horizon):
        raise ValueError(f"window ({s}, {t}] must satisfy 0 <= s < t <= horizon={signal.horizon}")
    ts, ix = signal.instants, signal.indices
    T: dict[VertexId, float] = defaultdict(float)
    Npq: dict[tuple[VertexId, VertexId], int] = defaultdict(int)
    N = 0
    for i in range(len(ix)):
        a, b = ts[i], signal.segment_end(i)
        lo, hi = max(a, s), min(b, t)
        if hi > lo:
            T[ix[i]] += hi - lo
        if i >= 1 and s < ts[i] <= t:
            N += 1
            Npq[(ix[i - 1], ix[i])] += 1
    return SwitchStats(N, dict(T), dict(Npq))


def xi_bar(graph: StabilityGraph, signal: SwitchingSignal, a: int, b: int) -> float:
    """Xi-sum with the signal's own dwell times over instants ``a..b``."""
    if not 0 <= a <= b < len(signal.indices):
        raise IndexError(f"instant range {a}..{b} out of bounds")
    ts, ix = signal.instants, signal.indices
    total = 0.0
    for i in range(a, b):
        total += graph.w(ix[i]) * (ts[i + 1] - ts[i]) + graph.edge_w(ix[i], ix[i + 1])
    return total


def aggregate_xi(graph: StabilityGraph, st: SwitchStats) -> float:
    """Same quantity from activation times and per-edge switch counts."""
    total = 0.0
    for p, T in st.T.items():
        total += graph.w(p) * T
    for (p, q), n in st.N_pq.items():
        total += graph.edge_w(p, q) * n
    return total


def write_signal(signal: SwitchingSignal, path: str | Path) -> None:
    lines = [f"# horizon {signal.horizon!r}", "# instant index"]
    lines += [f"{t!r} {json.dumps(v)}" for t, v in zip(signal.instants, signal.indices)]
    Path(path).write_text("\n".join(lines) + "\n")


def read_signal(path: str | Path, horizon: float | None = None) -> SwitchingSignal:
    """Two-column ``instant index`` text; ``# horizon T`` sets the horizon."""
    instants: list[float] = []
    indices: list[VertexId] = []
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), 1):
        line = raw.strip()
        if not line:
            continue
        if line.startswith("#"):
            parts = line[1:].split()
            if len(parts) == 2 and parts[0] == "horizon" and horizon is None:
                horizon = float(parts[1])
            continue
        cols = line.replace(",", " ").split()
        if len(cols) != 2:
            raise MalformedSignalError(f"{path}:{lineno}: expected two columns")
        instants.append(float(cols[0]))
        try:
            indices.append(json.loads(cols[1]))
        except json.JSONDecodeError:
            indices.append(cols[1])
    if not instants:
        raise MalformedSignalError(f"{path}: no switching instants")
    if horizon is None:
        horizon = instants[-1]
    return SwitchingSignal(tuple(instants), tuple(indices), horizon)


def from_dwells(indices: Sequence[VertexId], dwells: Sequence[float], horizon: float | None = None) -> SwitchingSignal:
    """Build a signal from a vertex sequence and the dwell on each but the last."""
    if len(dwells) not in (len(indices) - 1, len(indices)):
        raise MalformedSignalError("need one dwell per switch (optionally one more for the tail)")
    ts = [0.0]
    for D in dwells[: len(indices) - 1]:
        ts.append(ts[-1] + D)
    if horizon is None:
        horizon = ts[-1] + (dwells[-1] if len(dwells) == len(indices) else 0.0)
    return SwitchingSignal(tuple(ts), tuple(indices), float(horizon))


__all__ = [
    "DeadEndError",
    "MalformedSignalError",
    "SwitchingSignal",
    "Violation",
    "SignalCheck",
    "SwitchStats",
    "sample_signal",
    "validate_signal",
    "stats",
    "xi_bar",
    "aggregate_xi",
    "write_signal",
    "read_signal",
    "from_dwells",
]
