"""Sampling-based falsification of the Lyapunov-like function hypotheses.

Three inequalities are probed at random points ``xi`` (states) and ``eta``
(inputs):

* sandwich:    alpha_lo(|xi|) <= V_p(xi) <= alpha_hi(|xi|)
* decay:       <grad V_p(xi), f_p(xi, eta)> <= -lam_p V_p(xi) + gamma1(|eta|) + gamma2(|h_p(xi)|)
* comparison:  V_q(xi) <= mu_pq V_p(xi) for every admissible switch (p, q)

A clean run is evidence, not a proof.  Gradients come from central
differences since candidates are given as plain expressions.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.optimize import linprog

from .expr import Binary, Const, ExprAst, Var, compile_exprs, parse_expr, to_string
from .model import SystemSpec

FIT_SAMPLES = 2000
FIT_INFLATION = 2.0
GAMMA_FLOOR = 1e-6


@dataclass
class AssumptionProbeConfig:
    samples: int = 10_000
    state_box: tuple[float, float] | Sequence[tuple[float, float]] = (-2.0, 2.0)
    input_box: tuple[float, float] | Sequence[tuple[float, float]] = (-1.0, 1.0)
    alpha_lo: ExprAst | None = None
    alpha_hi: ExprAst | None = None
    gamma1: ExprAst | None = None
    gamma2: ExprAst | None = None
    fd_step: float = 1e-6
    seed: int = 0
    gamma_cap: float = 100.0
    rtol: float = 1e-7

    def __post_init__(self):
        if self.samples < 1:
            raise ValueError("sample count must be >= 1")
        for name in ("state_box", "input_box"):
            for lo, hi in _box(getattr(self, name), 0):
                if not lo <= hi:
                    raise ValueError(f"{name} is empty: [{lo}, {hi}]")


def _box(box, dim: int) -> list[tuple[float, float]]:
    if len(box) == 2 and all(isinstance(b, (int, float)) for b in box):
        return [(float(box[0]), float(box[1]))] * max(dim, 1)
    out = [(float(lo), float(hi)) for lo, hi in box]
    if dim and len(out) != dim:
        raise ValueError(f"box has {len(out)} intervals, expected {dim}")
    return out


def quadratic(c: float) -> ExprAst:
    """``c * s^2`` as an expression in ``s``."""
    return Binary("mul", Const(float(c)), Binary("pow", Var("s"), Const(2.0)))


@dataclass
class AssumptionViolation:
    kind: str  # "sandwich_lo" | "sandwich_hi" | "decay" | "comparison"
    where: object  # subsystem id or (p, q)
    xi: tuple[float, ...]
    eta: tuple[float, ...]
    margin: float


@dataclass
class AssumptionReport:
    violations: list[AssumptionViolation]
    worst_margins: dict[str, float]
    samples: int
    functions: dict[str, str]
    fitted: dict[str, bool] = field(default_factory=dict)
    notes: list[str] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations


class _Funcs:
    def __init__(self, spec: SystemSpec):
        xs, vs = spec.state_vars(), spec.input_vars()
        self.f, self.h, self.V = {}, {}, {}
        for s in spec.subsystems:
            if s.lyapunov is None or not s.dynamics:
                raise ValueError(f"subsystem {s.id!r} needs dynamics and a Lyapunov candidate")
            self.f[s.id] = compile_exprs(s.dynamics, xs + vs)
            self.h[s.id] = compile_exprs(s.output, xs)
            self.V[s.id] = compile_exprs([s.lyapunov], xs)


def grad_fd(V, xi: Sequence[float], step: float = 1e-6) -> list[float]:
    """Central-difference gradient with per-coordinate step ``step * (1 + |xi_i|)``."""
    g = []
    x = list(xi)
    for i, a in enumerate(x):
        h = step * (1.0 + abs(a))
        x[i] = a + h
        fp = V(*x)[0]
        x[i] = a - h
        fm = V(*x)[0]
        x[i] = a
        g.append((fp - fm) / (2 * h))
    return g


def _draw(rng: np.random.Generator, box, dim: int, n: int) -> np.ndarray:
    if dim == 0:
        return np.zeros((n, 0))
    b = np.array(_box(box, dim))
    return rng.uniform(b[:, 0], b[:, 1], size=(n, dim))


def _decay_terms(spec: SystemSpec, fn: _Funcs, xi, eta, step):
    """Per subsystem: (<grad V, f> + lam V, |eta|, |h(xi)|, lhs, V)."""
    out = []
    en = math.sqrt(sum(a * a for a in eta))
    for s in spec.subsystems:
        V = fn.V[s.id](*xi)[0]
        g = grad_fd(fn.V[s.id], xi, step)
        f = fn.f[s.id](*xi, *eta)
        lhs = sum(a * b for a, b in zip(g, f))
        hn = math.sqrt(sum(a * a for a in fn.h[s.id](*xi)))
        out.append((s, lhs + s.lam * V, en, hn, lhs, V))
    return out


def fit_gammas(spec: SystemSpec, probe: AssumptionProbeConfig) -> tuple[float, float, bool]:
    """Smallest ``c1 + c2`` with ``c1 |eta|^2 + c2 |h_p|^2`` covering the decay excess.

    Solved as an LP on a separate sample set, then inflated; coefficients are
    clipped to ``probe.gamma_cap``.  Returns ``(c1, c2, capped)``.
    """
    fn = _Funcs(spec)
    rng = np.random.default_rng(probe.seed + 1)
    n = min(FIT_SAMPLES, max(probe.samples, 100))
    X = _draw(rng, probe.state_box, spec.dims.d, n)
    E = _draw(rng, probe.input_box, spec.dims.m, n)
    A, b = [], []
    for xi, eta in zip(X.tolist(), E.tolist()):
        for _, excess, en, hn, _, _ in _decay_terms(spec, fn, xi, eta, probe.fd_step):
            if excess > 0:
                A.append([-(en**2), -(hn**2)])
                b.append(-excess)
    cap = probe.gamma_cap
    if not A:
        return GAMMA_FLOOR, GAMMA_FLOOR, False
    res = linprog([1.0, 1.0], A_ub=np.array(A), b_ub=np.array(b), bounds=[(GAMMA_FLOOR, cap)] * 2, method="highs")
    if res.status != 0:
        return cap, cap, True
    c1, c2 = (min(FIT_INFLATION * c, cap) for c in res.x)
    return c1, c2, False


def fit_alphas(spec: SystemSpec, probe: AssumptionProbeConfig) -> tuple[float, float]:
    """Quadratic sandwich ``a s^2 <= V_p <= b s^2`` fitted on samples, with 2x slack."""
    fn = _Funcs(spec)
    rng = np.random.default_rng(probe.seed + 2)
    X = _draw(rng, probe.state_box, spec.dims.d, FIT_SAMPLES)
    lo, hi = math.inf, 0.0
    for xi in X.tolist():
        r2 = sum(a * a for a in xi)
        if r2 < 1e-12:
            continue
        for s in spec.subsystems:
            ratio = fn.V[s.id](*xi)[0] / r2
            lo, hi = min(lo, ratio), max(hi, ratio)
    a = max(lo / 2, 1e-12) if math.isfinite(lo) else 1e-12
    return a, max(2 * hi, a)


def check_assumptions(spec: SystemSpec, probe: AssumptionProbeConfig | None = None) -> AssumptionReport:
    """Sample the three hypotheses and report every violation with its margin.

    Missing comparison functions are replaced by fitted quadratics (see
    :func:`fit_gammas`, :func:`fit_alphas`); the report flags which ones were
    fitted so they are never mistaken for certified facts.
    """
    probe = probe or AssumptionProbeConfig()
    fn = _Funcs(spec)
    fitted = {}
    notes = []
    g1, g2 = probe.gamma1, probe.gamma2
    if g1 is None or g2 is None:
        c1, c2, capped = fit_gammas(spec, probe)
        if capped:
            notes.append(f"gamma fit infeasible below cap {probe.gamma_cap:g}; using the cap")
        if g1 is None:
            g1, fitted["gamma1"] = quadratic(c1), True
        if g2 is None:
            g2, fitted["gamma2"] = quadratic(c2), True
    al, ah = probe.alpha_lo, probe.alpha_hi
    if al is None or ah is None:
        a, b = fit_alphas(spec, probe)
        if al is None:
            al, fitted["alpha_lo"] = quadratic(a), True
        if ah is None:
            ah, fitted["alpha_hi"] = quadratic(b), True
    G1, G2, AL, AH = (compile_exprs([e], ["s"]) for e in (g1, g2, al, ah))

    rng = np.random.default_rng(probe.seed)
    X = _draw(rng, probe.state_box, spec.dims.d, probe.samples)
    E = _draw(rng, probe.input_box, spec.dims.m, probe.samples)
    violations: list[AssumptionViolation] = []
    worst = {"sandwich_lo": math.inf, "sandwich_hi": math.inf, "decay": math.inf, "comparison": math.inf}
    rtol = probe.rtol

    def note(kind, where, xi, eta, margin, scale, tol_rel):
        worst[kind] = min(worst[kind], margin)
        if margin < -tol_rel * (1.0 + scale):
            violations.append(AssumptionViolation(kind, where, tuple(xi), tuple(eta), margin))

    for xi, eta in zip(X.tolist(), E.tolist()):
        r = math.sqrt(sum(a * a for a in xi))
        lo, hi = AL(r)[0], AH(r)[0]
        Vs = {}
        for s, _, en, hn, lhs, V in _decay_terms(spec, fn, xi, eta, probe.fd_step):
            Vs[s.id] = V
            note("sandwich_lo", s.id, xi, eta, V - lo, abs(V), 1e-12)
            note("sandwich_hi", s.id, xi, eta, hi - V, abs(V), 1e-12)
            rhs = -s.lam * V + G1(en)[0] + G2(hn)[0]
            note("decay", s.id, xi, eta, rhs - lhs, abs(lhs) + abs(rhs), rtol)
        for e in spec.edges:
            note("comparison", (e.src, e.dst), xi, eta, e.mu * Vs[e.src] - Vs[e.dst], abs(Vs[e.dst]), 1e-12)

    functions = {"gamma1": to_string(g1), "gamma2": to_string(g2), "alpha_lo": to_string(al), "alpha_hi": to_string(ah)}
    return AssumptionReport(violations, worst, probe.samples, functions, fitted, notes)


def parse_scalar_fn(text: str) -> ExprAst:
    """Comparison function of the scalar argument ``s``."""
    return parse_expr(text, ["s"])


__all__ = [
    "AssumptionProbeConfig",
    "AssumptionViolation",
    "AssumptionReport",
    "check_assumptions",
    "fit_gammas",
    "fit_alphas",
    "grad_fd",
    "quadratic",
    "parse_scalar_fn",
]
