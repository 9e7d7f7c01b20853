"""Integration of the switched system and the trajectory bound functions.

``psi1`` and ``psi2`` are the two time-varying factors in the estimate::

    V_sigma(t)(x(t)) <= psi1(t) * V_sigma(0)(x0)
                        + (gamma1(|v|_[0,t]) + gamma2(|y|_[0,t])) * psi2(t)

With signed rates ``lam_p`` (positive on IOSS subsystems), switch instants
``tau_0 = 0 < ... < tau_N <= t`` and ``tau_{N+1} := t``::

    psi1(t) = exp(-sum_{i=0..N} lam_i (tau_{i+1} - tau_i) + sum_{i<N} ln mu_{i,i+1})

    psi2(t) = sum_{i=0..N} exp(-sum_{j=i+1..N} lam_j (tau_{j+1} - tau_j)
                               + sum_{j=i..N-1} ln mu_{j,j+1})
                           * (1 - exp(-lam_i (tau_{i+1} - tau_i))) / lam_i
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from .expr import ExprAst, compile_exprs
from .graph import StabilityGraph, build_graph
from .model import SystemSpec
from .signals import SwitchingSignal

DEFAULT_STEP = 1e-3
BLOWUP_NORM = 1e100

InputFn = Callable[[float], Sequence[float]]


class BlowUpError(ArithmeticError):
    def __init__(self, time: float, detail: str = ""):
        self.time = time
        super().__init__(f"state blew up at t={time:.6g}" + (f": {detail}" if detail else ""))


@dataclass
class Trajectory:
    times: np.ndarray
    states: np.ndarray
    outputs: np.ndarray
    inputs: np.ndarray
    active: list
    lyap: np.ndarray

    @property
    def max_norm(self) -> float:
        return float(np.max(np.linalg.norm(self.states, axis=1))) if len(self.states) else 0.0


class RandomHoldInput:
    """Piecewise-constant input, each component uniform on ``[low, high]`` per hold interval."""

    def __init__(self, m: int, low: float, high: float, horizon: float, hold: float = 0.1, seed: int = 0):
        rng = np.random.default_rng(seed)
        self.hold = hold
        vals = rng.uniform(low, high, size=(int(math.ceil(horizon / hold)) + 1, m))
        self.values = [tuple(float(a) for a in row) for row in vals]

    def __call__(self, t: float) -> tuple[float, ...]:
        k = min(int(t / self.hold + 1e-12), len(self.values) - 1)
        return self.values[k]


def _as_input(u, m: int) -> InputFn:
    if u is None:
        zero = (0.0,) * m
        return lambda t: zero
    if callable(u):
        return u
    const = tuple(float(x) for x in np.atleast_1d(u))
    if len(const) != m:
        raise ValueError(f"constant input must have {m} components")
    return lambda t: const


class _Compiled:
    def __init__(self, spec: SystemSpec):
        xs, vs = spec.state_vars(), spec.input_vars()
        self.f = {}
        self.h = {}
        self.V = {}
        for s in spec.subsystems:
            if not s.dynamics:
                raise ValueError(f"subsystem {s.id!r} has no dynamics")
            self.f[s.id] = compile_exprs(s.dynamics, xs + vs)
            self.h[s.id] = compile_exprs(s.output, xs)
            self.V[s.id] = compile_exprs([s.lyapunov], xs) if s.lyapunov is not None else None


def integrate(
    spec: SystemSpec,
    signal: SwitchingSignal,
    x0: Sequence[float],
    input=None,
    horizon: float | None = None,
    step: float = DEFAULT_STEP,
) -> Trajectory:
    """Classical RK4 on a uniform grid, sub-stepping exactly at switch instants.

    ``input`` is ``None`` (zero), a constant vector or a callable ``t -> v``.
    Samples are taken on ``0, step, 2*step, ...`` up to ``horizon``.
    """
    if step <= 0:
        raise ValueError("step must be positive")
    d, m = spec.dims.d, spec.dims.m
    x = [float(a) for a in x0]
    if len(x) != d:
        raise ValueError(f"x0 must have {d} components, got {len(x)}")
    horizon = signal.horizon if horizon is None else horizon
    if horizon > signal.horizon + 1e-12:
        raise ValueError("horizon exceeds the signal's horizon")
    u = _as_input(input, m)
    comp = _Compiled(spec)
    n = int(math.ceil(horizon / step - 1e-9))
    times = np.minimum(np.arange(n + 1) * step, horizon)
    states = np.empty((n + 1, d))
    inputs = np.empty((n + 1, m))
    instants = signal.instants

    def rhs(f, t, xv):
        return f(*xv, *u(t))

    def rk4(f, t, xv, h):
        k1 = rhs(f, t, xv)
        k2 = rhs(f, t + h / 2, [a + h / 2 * b for a, b in zip(xv, k1)])
        k3 = rhs(f, t + h / 2, [a + h / 2 * b for a, b in zip(xv, k2)])
        k4 = rhs(f, t + h, [a + h * b for a, b in zip(xv, k3)])
        return [a + h / 6 * (b1 + 2 * b2 + 2 * b3 + b4) for a, b1, b2, b3, b4 in zip(xv, k1, k2, k3, k4)]

    states[0] = x
    inputs[0] = u(0.0) if m else ()
    pos = 0
    for k in range(n):
        t0, t1 = float(times[k]), float(times[k + 1])
        t = t0
        while t < t1:
            while pos + 1 < len(instants) and instants[pos + 1] <= t:
                pos += 1
            nxt = instants[pos + 1] if pos + 1 < len(instants) else math.inf
            end = min(t1, nxt)
            try:
                x = rk4(comp.f[signal.indices[pos]], t, x, end - t)
            except (ArithmeticError, OverflowError) as exc:
                raise BlowUpError(t, str(exc)) from None
            if not all(math.isfinite(a) and abs(a) < BLOWUP_NORM for a in x):
                raise BlowUpError(end)
            t = end
        states[k + 1] = x
        inputs[k + 1] = u(t1) if m else ()
    active = [signal.index_at(float(t)) for t in times]
    outputs = np.array([comp.h[a](*s) for a, s in zip(active, states)]).reshape(n + 1, -1)
    lyap = np.array(
        [comp.V[a](*s)[0] if comp.V[a] is not None else math.nan for a, s in zip(active, states)]
    )
    return Trajectory(times, states, outputs, inputs, active, lyap)


def _segments(graph: StabilityGraph, signal: SwitchingSignal, t: float):
    k = signal.position_at(t)
    ts, ix = signal.instants, signal.indices
    lam = [-graph.w(ix[i]) for i in range(k + 1)]
    D = [(ts[i + 1] if i < k else t) - ts[i] for i in range(k + 1)]
    lnmu = [graph.edge_w(ix[i], ix[i + 1]) for i in range(k)]
    return lam, D, lnmu


def psi1_exponent(graph: StabilityGraph, signal: SwitchingSignal, t: float) -> float:
    lam, D, lnmu = _segments(graph, signal, t)
    return -sum(a * b for a, b in zip(lam, D)) + sum(lnmu)


def psi1(graph: StabilityGraph, signal: SwitchingSignal, t: float) -> float:
    return math.exp(psi1_exponent(graph, signal, t))


def _decay_factor(lam: float, D: float) -> float:
    # (1 - exp(-lam D)) / lam, positive for either sign of lam
    return -math.expm1(-lam * D) / lam


def psi2(graph: StabilityGraph, signal: SwitchingSignal, t: float, literal: bool = False) -> float:
    """Gain on the input/output term of the estimate.

    ``literal=True`` drops the comparison factor of the switch that ends
    each interval (sum over ``j = i+1..N-1``), which underestimates the
    bound whenever some ``mu > 1``.
    """
    lam, D, lnmu = _segments(graph, signal, t)
    k = len(lam) - 1
    total = 0.0
    tail = 0.0  # -sum_{j>i} lam_j D_j + sum_{j>i} lnmu_j
    for i in range(k, -1, -1):
        entry = lnmu[i] if (i < k and not literal) else 0.0
        total += math.exp(tail + entry) * _decay_factor(lam[i], D[i])
        tail += -lam[i] * D[i] + (lnmu[i] if i < k else 0.0)
    return total


def psi_series(graph: StabilityGraph, signal: SwitchingSignal, times: Sequence[float], literal: bool = False):
    p1 = np.array([psi1(graph, signal, float(t)) for t in times])
    p2 = np.array([psi2(graph, signal, float(t), literal) for t in times])
    return p1, p2


@dataclass
class BoundCheck:
    slack: np.ndarray
    psi1: np.ndarray
    psi2: np.ndarray
    min_slack: float
    t_min: float


def _running_norm(a: np.ndarray) -> np.ndarray:
    if a.size == 0 or a.shape[1] == 0:
        return np.zeros(len(a))
    return np.maximum.accumulate(np.linalg.norm(a, axis=1))


def check_bound(
    spec: SystemSpec,
    signal: SwitchingSignal,
    trajectory: Trajectory,
    gamma1: ExprAst,
    gamma2: ExprAst,
    graph: StabilityGraph | None = None,
    literal_psi2: bool = False,
) -> BoundCheck:
    """Slack of the Lyapunov estimate at every grid point (negative = violated)."""
    graph = graph or build_graph(spec)
    g1 = compile_exprs([gamma1], ["s"])
    g2 = compile_exprs([gamma2], ["s"])
    p1, p2 = psi_series(graph, signal, trajectory.times, literal_psi2)
    vn = _running_norm(trajectory.inputs)
    yn = _running_norm(trajectory.outputs)
    gam = np.array([g1(a)[0] + g2(b)[0] for a, b in zip(vn, yn)])
    rhs = p1 * trajectory.lyap[0] + gam * p2
    slack = rhs - trajectory.lyap
    i = int(np.argmin(slack))
    return BoundCheck(slack, p1, p2, float(slack[i]), float(trajectory.times[i]))


TRAJECTORY_COLUMNS = ("time", "active", "x", "y", "V", "psi1", "psi2", "slack")


def write_trajectory(
    path: str | Path,
    trajectory: Trajectory,
    psi1_values: Sequence[float] | None = None,
    psi2_values: Sequence[float] | None = None,
    slack: Sequence[float] | None = None,
    delimiter: str = ",",
) -> None:
    """Delimited export: time, active, x_1..x_d, y_1..y_p, V, psi1, psi2, slack."""
    n = len(trajectory.times)
    d = trajectory.states.shape[1]
    p = trajectory.outputs.shape[1]
    nan = [math.nan] * n
    p1 = nan if psi1_values is None else psi1_values
    p2 = nan if psi2_values is None else psi2_values
    sl = nan if slack is None else slack
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, delimiter=delimiter)
        w.writerow(["time", "active"] + [f"x_{i + 1}" for i in range(d)] + [f"y_{i + 1}" for i in range(p)] + ["V", "psi1", "psi2", "slack"])
        for k in range(n):
            w.writerow(
                [repr(float(trajectory.times[k])), trajectory.active[k]]
                + [repr(float(a)) for a in trajectory.states[k]]
                + [repr(float(a)) for a in trajectory.outputs[k]]
                + [repr(float(trajectory.lyap[k])), repr(float(p1[k])), repr(float(p2[k])), repr(float(sl[k]))]
            )


def read_trajectory(path: str | Path, delimiter: str = ",") -> dict[str, np.ndarray]:
    with open(path, newline="") as fh:
        r = csv.reader(fh, delimiter=delimiter)
        header = next(r)
        rows = list(r)
    cols: dict[str, np.ndarray] = {}
    for j, name in enumerate(header):
        vals = [row[j] for row in rows]
        if name == "active":
            cols[name] = np.array(vals, dtype=object)
        else:
            cols[name] = np.array([float(v) for v in vals])
    return cols


__all__ = [
    "DEFAULT_STEP",
    "BlowUpError",
    "Trajectory",
    "RandomHoldInput",
    "integrate",
    "psi1",
    "psi1_exponent",
    "psi2",
    "psi_series",
    "BoundCheck",
    "check_bound",
    "write_trajectory",
    "read_trajectory",
]
