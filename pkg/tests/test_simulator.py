import math

import numpy as np
import pytest

from ioss_cert.assumptions import quadratic
from ioss_cert.config import spec_from_dict
from ioss_cert.graph import build_graph
from ioss_cert.signals import from_dwells, sample_signal
from ioss_cert.simulator import (
    BlowUpError,
    RandomHoldInput,
    check_bound,
    integrate,
    psi1,
    psi2,
    read_trajectory,
    write_trajectory,
)

from _oracles import comparison_ode


def scalar(f, lam=1.0, stable=True, extra=()):
    subs = [{"id": 1, "stable": stable, "lambda": lam, "delta": 0.1, "Delta": 100, "f": [f], "h": ["x1"], "V": "x1^2"}]
    subs += list(extra)
    edges = [{"from": 1, "to": 2, "mu": 1}, {"from": 2, "to": 1, "mu": 1}] if extra else []
    return spec_from_dict({"dims": {"d": 1, "m": 1, "p_out": 1}, "subsystems": subs, "edges": edges})


def one_mode(T):
    return from_dwells((1,), (), T)


def test_exponential_decay():
    tr = integrate(scalar("-x1"), one_mode(1.0), [1.0], step=1e-3)
    assert abs(tr.states[-1, 0] - math.exp(-1)) < 1e-8
    assert tr.times[-1] == 1.0


def test_zero_field_constant():
    tr = integrate(scalar("0"), one_mode(2.0), [0.7], step=0.01)
    assert np.all(tr.states == 0.7)


def test_rk4_order():
    spec = scalar("-x1")
    errs = [abs(integrate(spec, one_mode(1.0), [1.0], step=h).states[-1, 0] - math.exp(-1)) for h in (0.1, 0.05)]
    assert 8 <= errs[0] / errs[1] <= 32


def test_switch_instant_off_grid_is_exact():
    extra = [{"id": 2, "stable": True, "lambda": 2.0, "delta": 0.1, "Delta": 100, "f": ["-2*x1"], "h": ["x1"], "V": "x1^2"}]
    spec = scalar("-x1", extra=extra)
    tau = 0.3337
    sig = from_dwells((1, 2), (tau,), 1.0)
    tr = integrate(spec, sig, [1.0], step=0.01)
    assert abs(tr.states[-1, 0] - math.exp(-tau - 2 * (1 - tau))) < 1e-9
    assert tr.active[0] == 1 and tr.active[-1] == 2


def test_input_enters():
    tr = integrate(scalar("-x1 + v1"), one_mode(1.0), [0.0], input=[1.0], step=1e-3)
    assert abs(tr.states[-1, 0] - (1 - math.exp(-1))) < 1e-9


def test_blow_up_reports_time():
    with pytest.raises(BlowUpError) as ei:
        integrate(scalar("x1^2", stable=False), one_mode(2.0), [1.0], step=1e-3)
    assert 0.9 < ei.value.time <= 1.01


def test_psi_single_stable():
    g = build_graph(scalar("-x1"))
    s = one_mode(5.0)
    assert psi1(g, s, 1.0) == pytest.approx(math.exp(-1))
    assert psi2(g, s, 1.0) == pytest.approx(1 - math.exp(-1))
    assert psi2(g, s, 1e-9) == pytest.approx(1e-9, rel=1e-6)
    assert psi2(g, s, 0.0) == 0.0


def test_psi1_example_at_block_end(gd):
    s = from_dwells((1, 2, 1), (3.5, 4.0), 15.0)
    assert psi1(gd, s, 7.5) == pytest.approx(math.exp(-9.33))


@pytest.mark.parametrize("seed", range(4))
def test_psi_match_comparison_ode(gd, seed):
    s = sample_signal(gd, 1, 25.0, seed)
    for t in (2.0, 9.3, 17.7, 25.0):
        k = s.position_at(t)
        rates = [-gd.w(s.indices[i]) for i in range(k + 1)]
        dw = [s.instants[i + 1] - s.instants[i] for i in range(k)]
        mus = [math.exp(gd.edge_w(s.indices[i], s.indices[i + 1])) for i in range(k)]
        tl = t - s.instants[k]
        assert psi1(gd, s, t) == pytest.approx(comparison_ode(rates, dw, mus, 0.0, tl), rel=1e-8)
        assert psi2(gd, s, t) == pytest.approx(comparison_ode(rates, dw, mus, 1.0, tl), rel=1e-8)


def test_literal_psi2_drops_switch_factor(gd):
    s = from_dwells((1, 3, 1), (3.5, 4.0), 15.0)
    exact, lit = psi2(gd, s, 7.5), psi2(gd, s, 7.5, literal=True)
    assert lit < exact
    # the only mu > 1 switch is 1 -> 3; it multiplies the first interval's term
    first = math.exp(0.73 * 4.0) * (1 - math.exp(-3.5 * 3.5)) / 3.5
    assert exact - lit == pytest.approx(first * (2 - 1))


def test_bound_single_mode_gas():
    spec = scalar("-x1")
    tr = integrate(spec, one_mode(3.0), [1.3], step=1e-3)
    # V = x^2 decays at rate 2 >= lam = 1; gains are irrelevant here
    bc = check_bound(spec, one_mode(3.0), tr, quadratic(0.0), quadratic(0.0))
    assert bc.min_slack >= -1e-9


def test_bound_zero_state():
    spec = scalar("-x1")
    tr = integrate(spec, one_mode(1.0), [0.0], step=1e-2)
    bc = check_bound(spec, one_mode(1.0), tr, quadratic(1.0), quadratic(1.0))
    assert np.all(tr.lyap == 0) and bc.min_slack >= 0


@pytest.mark.parametrize("seed", range(10))
def test_bound_example(demo, gd, seed):
    from ioss_cert.assumptions import AssumptionProbeConfig, fit_gammas

    c1, c2, _ = fit_gammas(demo, AssumptionProbeConfig())
    sig = sample_signal(gd, 1, 15.0, seed)
    rng = np.random.default_rng(seed)
    tr = integrate(demo, sig, rng.uniform(-1, 1, 2), RandomHoldInput(1, -0.5, 0.5, 15.0, seed=seed), step=1e-2)
    bc = check_bound(demo, sig, tr, quadratic(c1), quadratic(c2), gd)
    assert bc.min_slack >= -1e-3


def test_trajectory_file(tmp_path, demo, gd):
    sig = sample_signal(gd, 1, 2.0, 0)
    tr = integrate(demo, sig, [0.5, -0.5], step=0.1)
    write_trajectory(tmp_path / "t.csv", tr)
    cols = read_trajectory(tmp_path / "t.csv")
    assert list(cols) == ["time", "active", "x_1", "x_2", "y_1", "V", "psi1", "psi2", "slack"]
    np.testing.assert_array_equal(cols["x_2"], tr.states[:, 1])
