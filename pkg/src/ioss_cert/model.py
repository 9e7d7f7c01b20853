"""System description: subsystems, admissible switches and dwell bounds."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Hashable, Sequence

from .expr import ExprAst, eval_expr, free_vars, parse_expr

VertexId = Hashable


class SpecError(ValueError):
    """Invalid system description; ``path`` points at the offending field."""

    def __init__(self, path: str, message: str):
        self.path = path
        super().__init__(f"{path}: {message}")


@dataclass(frozen=True)
class SubsystemSpec:
    id: VertexId
    stable: bool
    lambda_abs: float
    delta: float
    Delta: float
    dynamics: tuple[ExprAst, ...] = ()
    output: tuple[ExprAst, ...] = ()
    lyapunov: ExprAst | None = None

    @property
    def lam(self) -> float:
        """Signed decay rate: positive for IOSS subsystems, negative otherwise."""
        return self.lambda_abs if self.stable else -self.lambda_abs


@dataclass(frozen=True)
class EdgeSpec:
    src: VertexId
    dst: VertexId
    mu: float


@dataclass(frozen=True)
class Dims:
    d: int
    m: int
    p_out: int


@dataclass(frozen=True)
class Defaults:
    tolerance: float = 1e-9
    rk_step: float = 1e-3
    seed: int = 0


@dataclass(frozen=True)
class SystemSpec:
    dims: Dims
    subsystems: tuple[SubsystemSpec, ...]
    edges: tuple[EdgeSpec, ...]
    defaults: Defaults = field(default_factory=Defaults)
    name: str = "system"

    def subsystem(self, vid: VertexId) -> SubsystemSpec:
        for s in self.subsystems:
            if s.id == vid:
                return s
        raise KeyError(vid)

    @property
    def has_dynamics(self) -> bool:
        return all(s.dynamics for s in self.subsystems)

    def state_vars(self) -> list[str]:
        return state_vars(self.dims.d)

    def input_vars(self) -> list[str]:
        return input_vars(self.dims.m)


def state_vars(d: int) -> list[str]:
    return [f"x{i + 1}" for i in range(d)]


def input_vars(m: int) -> list[str]:
    return [f"v{i + 1}" for i in range(m)]


def validate(spec: SystemSpec, lyapunov_samples: int = 64, seed: int = 0) -> SystemSpec:
    """Check the structural invariants of ``spec`` and return it unchanged.

    Lyapunov candidates are checked for ``V(0) = 0`` and nonnegativity on a
    handful of pseudo-random points in ``[-1, 1]^d``; a pass is evidence only.
    """
    import random

    d, m = spec.dims.d, spec.dims.m
    if d < 0 or m < 0 or spec.dims.p_out < 0:
        raise SpecError("dims", "dimensions must be nonnegative")
    ids = [s.id for s in spec.subsystems]
    if not ids:
        raise SpecError("subsystems", "at least one subsystem is required")
    seen = set()
    for i, s in enumerate(spec.subsystems):
        path = f"subsystems[{i}]"
        if s.id in seen:
            raise SpecError(f"{path}.id", f"duplicate subsystem id {s.id!r}")
        seen.add(s.id)
        if not (s.lambda_abs > 0 and math.isfinite(s.lambda_abs)):
            raise SpecError(f"{path}.lambda", f"|lambda| must be positive and finite, got {s.lambda_abs!r}")
        if not (s.delta > 0 and math.isfinite(s.Delta)):
            raise SpecError(f"{path}.delta", f"dwell bounds must be positive and finite, got delta={s.delta!r}")
        if s.delta > s.Delta:
            raise SpecError(f"{path}.Delta", f"delta={s.delta!r} exceeds Delta={s.Delta!r}")
        xs, vs = state_vars(d), input_vars(m)
        if s.dynamics:
            if len(s.dynamics) != d:
                raise SpecError(f"{path}.f", f"expected {d} dynamics components, got {len(s.dynamics)}")
            for j, e in enumerate(s.dynamics):
                extra = free_vars(e) - set(xs) - set(vs)
                if extra:
                    raise SpecError(f"{path}.f[{j}]", f"unknown variables {sorted(extra)}")
        if s.output:
            if len(s.output) != spec.dims.p_out:
                raise SpecError(f"{path}.h", f"expected {spec.dims.p_out} output components, got {len(s.output)}")
            for j, e in enumerate(s.output):
                extra = free_vars(e) - set(xs)
                if extra:
                    raise SpecError(f"{path}.h[{j}]", f"unknown variables {sorted(extra)}")
        if s.lyapunov is not None:
            extra = free_vars(s.lyapunov) - set(xs)
            if extra:
                raise SpecError(f"{path}.V", f"unknown variables {sorted(extra)}")
            origin = dict.fromkeys(xs, 0.0)
            if abs(eval_expr(s.lyapunov, origin)) > 1e-12:
                raise SpecError(f"{path}.V", "Lyapunov candidate must vanish at the origin")
            rng = random.Random(seed)
            for _ in range(lyapunov_samples):
                pt = {x: rng.uniform(-1.0, 1.0) for x in xs}
                if eval_expr(s.lyapunov, pt) < 0:
                    raise SpecError(f"{path}.V", f"Lyapunov candidate negative at {pt}")
    pairs = set()
    for k, e in enumerate(spec.edges):
        path = f"edges[{k}]"
        if e.src not in seen:
            raise SpecError(f"{path}.from", f"unknown vertex {e.src!r}")
        if e.dst not in seen:
            raise SpecError(f"{path}.to", f"unknown vertex {e.dst!r}")
        if e.src == e.dst:
            raise SpecError(path, f"self-loop on {e.src!r} is not an admissible switch")
        if not (e.mu >= 1.0 and math.isfinite(e.mu)):
            raise SpecError(f"{path}.mu", f"mu must satisfy mu >= 1 (Lyapunov comparison factor), got {e.mu!r}")
        if (e.src, e.dst) in pairs:
            raise SpecError(path, f"duplicate edge {e.src!r}->{e.dst!r}")
        pairs.add((e.src, e.dst))
    return spec


def parse_vector(texts: Sequence[str], allowed: Sequence[str]) -> tuple[ExprAst, ...]:
    return tuple(parse_expr(t, allowed) for t in texts)


def simple_spec(
    subsystems: Sequence[tuple[VertexId, bool, float, float, float]],
    edges: Sequence[tuple[VertexId, VertexId, float]] = (),
) -> SystemSpec:
    """Graph-only spec from ``(id, stable, |lambda|, delta, Delta)`` tuples."""
    subs = tuple(SubsystemSpec(i, st, la, dl, Dl) for i, st, la, dl, Dl in subsystems)
    es = tuple(EdgeSpec(a, b, mu) for a, b, mu in edges)
    return validate(SystemSpec(Dims(0, 0, 0), subs, es))


__all__ = [
    "VertexId",
    "SpecError",
    "SubsystemSpec",
    "EdgeSpec",
    "Dims",
    "Defaults",
    "SystemSpec",
    "validate",
    "parse_vector",
    "simple_spec",
    "state_vars",
    "input_vars",
]
