import math
import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ioss_cert.certifier import (
    Overall,
    build_reduced_graph,
    certify,
    check_C1,
    check_C2,
    max_cycle_mean,
)
from ioss_cert.enumeration import enumerate_cycles
from ioss_cert.graph import StabilityGraph, Vertex, Walk, xi_worst
from ioss_cert.model import simple_spec

from _oracles import brute_c1, brute_c2, naive_cycles, random_graph


def test_reduced_weights_example(gd):
    r = build_reduced_graph(gd)
    assert r.weights[(1, 2)] == pytest.approx(-12.25)
    assert r.weights[(1, 3)] == pytest.approx(-11.5569, abs=1e-4)
    assert r.weights[(2, 1)] == pytest.approx(2.92)
    assert r.weights[(3, 1)] == pytest.approx(2.92)


def test_reduced_graph_zero_weights_unchanged():
    g = StabilityGraph.from_weights({0: -1e-300, 1: 1e-300}, {0: (1, 1), 1: (1, 1)}, {(0, 1): 0.0, (1, 0): 0.0})
    assert build_reduced_graph(g).weights == {(0, 1): pytest.approx(0.0, abs=1e-299), (1, 0): pytest.approx(0.0, abs=1e-299)}


def test_max_cycle_mean_example(gd):
    assert max_cycle_mean(build_reduced_graph(gd)) == pytest.approx(max(-9.33 / 2, -8.6369 / 2), abs=1e-4)


def test_max_cycle_mean_acyclic():
    g = StabilityGraph([Vertex(i, -1.0, 1, 1) for i in range(4)], {(0, 1): 1.0, (1, 2): 0.0, (0, 3): 2.0})
    assert max_cycle_mean(build_reduced_graph(g)) is None


@given(st.integers(0, 10**6))
@settings(max_examples=60, deadline=None)
def test_max_cycle_mean_brute_force(seed):
    g = random_graph(random.Random(seed))
    r = build_reduced_graph(g)
    cycles = naive_cycles(g)
    got = max_cycle_mean(r)
    if not cycles:
        assert got is None
        return
    want = max(r.walk_weight(Walk(c)) / (len(c) - 1) for c in cycles)
    assert got == pytest.approx(want, abs=1e-9)


def test_example_c1_c2(gd):
    cs = enumerate_cycles(gd)
    c1 = check_C1(gd, cs)
    assert [c.margin for c in c1] == pytest.approx([9.33, 8.64, 9.33, 8.64], abs=0.05)
    assert all(c.verdict for c in c1)
    c2 = check_C2(gd, cs)
    pairs = {(p.simple_walk.vertices, p.cycle.vertices): p.joint_xi for p in c2}
    assert set(pairs) == {((3, 1), (1, 2, 1)), ((2, 1), (1, 3, 1)), ((2, 1, 3), (3, 1, 3)), ((3, 1, 2), (2, 1, 2))}
    assert pairs[((2, 1), (1, 3, 1))] == pytest.approx(-5.677, abs=0.05)
    assert pairs[((3, 1), (1, 2, 1))] == pytest.approx(-6.41, abs=0.01)
    assert all(p.verdict for p in c2)


def test_example_certified(demo):
    rep = certify(demo)
    assert rep.overall is Overall.CERTIFIED
    assert rep.precheck.consistent and not rep.warnings
    assert rep.min_block_margin == pytest.approx(5.7169, abs=1e-4)
    assert rep.residual_bound == 3 and rep.psi2_bound > 0


def test_single_ioss_subsystem_vacuous():
    rep = certify(simple_spec([(1, True, 1.0, 1.0, 2.0)]))
    assert rep.overall is Overall.CERTIFIED
    assert any("no cycles" in w for w in rep.warnings)


def test_only_cycle_unstable():
    spec = simple_spec([(1, False, 1.0, 1, 1), (2, False, 0.5, 1, 1), (3, True, 9.0, 1, 1)], [(1, 2, 1), (2, 1, 1), (3, 1, 1)])
    rep = certify(spec)
    assert rep.overall is Overall.REFUTED_C1
    assert {w.cycle.vertices for w in rep.witnesses()} == {(1, 2, 1), (2, 1, 2)}


def test_boundary_case_fails_strict():
    g = StabilityGraph([Vertex("a", -1.0, 1, 1), Vertex("b", 1.0, 1, 1)], {("a", "b"): 0.0, ("b", "a"): 0.0})
    assert certify(g).overall is Overall.REFUTED_C1


def test_hamiltonian_cycle_has_no_pairs():
    g = StabilityGraph([Vertex(i, -1.0, 1, 1) for i in range(3)], {(0, 1): 0.0, (1, 2): 0.0, (2, 0): 0.0})
    rep = certify(g)
    assert rep.per_pair == [] and rep.overall is Overall.CERTIFIED


def test_mu13_refutes_c1(variant):
    spec = variant(lambda d: d["edges"][1].update(mu=math.exp(13)))
    rep = certify(spec)
    assert rep.overall is Overall.REFUTED_C1
    bad = {w.cycle.vertices for w in rep.witnesses() if not hasattr(w, "simple_walk")}
    assert bad == {(1, 3, 1), (3, 1, 3)}
    g = rep.graph
    assert xi_worst(g, Walk((1, 3, 1))) == pytest.approx(-12.25 + 2.92 + 13)


def test_delta2_17(variant):
    """The pair (2,1)+(1,3,1) fails, but so does the cycle (1,2,1): C1 takes precedence."""
    rep = certify(variant(lambda d: d["subsystems"][1].update(Delta=17)))
    pair = next(p for p in rep.per_pair if p.simple_walk.vertices == (2, 1) and p.cycle.vertices == (1, 3, 1))
    assert not pair.verdict
    assert pair.joint_xi == pytest.approx(0.73 * 17 - 12.25 + 2.92 + math.log(2))
    cyc = next(c for c in rep.per_cycle if c.cycle.vertices == (1, 2, 1))
    assert cyc.xi_worst == pytest.approx(-12.25 + 0.73 * 17)
    assert not cyc.verdict
    assert rep.overall is Overall.REFUTED_C1


def test_delta2_14_refutes_c2_only(variant):
    rep = certify(variant(lambda d: d["subsystems"][1].update(Delta=14)))
    assert rep.c1_ok and rep.overall is Overall.REFUTED_C2
    wit = {(w.simple_walk.vertices, w.cycle.vertices): w.joint_xi for w in rep.witnesses()}
    assert wit == {
        ((2, 1), (1, 3, 1)): pytest.approx(0.73 * 14 - 12.25 + 2.92 + math.log(2)),
        ((3, 1), (1, 2, 1)): pytest.approx(2.92 - 12.25 + 0.73 * 14),
    }


def test_cap_gives_inconclusive():
    n = 6
    g = StabilityGraph([Vertex(i, -1.0, 1, 1) for i in range(n)], {(a, b): 0.0 for a in range(n) for b in range(n) if a != b})
    rep = certify(g, max_cycles=50)
    assert rep.overall is Overall.INCONCLUSIVE_CAP and rep.warnings


def test_threads_env_gives_same_answer(demo, monkeypatch):
    a = certify(demo).to_dict()
    monkeypatch.setenv("IOSS_CERTIFY_THREADS", "4")
    assert certify(demo).to_dict() == a


@given(st.integers(0, 10**6))
@settings(max_examples=60, deadline=None)
def test_verdicts_match_brute_force(seed):
    g = random_graph(random.Random(seed), max_n=6)
    rep = certify(g)
    assert rep.c1_ok == brute_c1(g)
    assert rep.precheck.consistent
    if rep.c1_ok:
        assert rep.c2_ok == brute_c2(g)


def _bump(g, rng):
    verts = []
    for v in g.vertices:
        D = v.Delta + (rng.uniform(0, 2) if v.w > 0 else 0.0)
        verts.append(Vertex(v.id, v.w, v.delta, D))
    edges = {e: w + rng.uniform(0, 1) * (rng.random() < 0.5) for e, w in g.edges.items()}
    return StabilityGraph(verts, edges)


@given(st.integers(0, 10**6))
@settings(max_examples=60, deadline=None)
def test_monotone_in_unstable_dwell_and_mu(seed):
    rng = random.Random(seed)
    g = random_graph(rng, max_n=6)
    if certify(g).overall is Overall.CERTIFIED:
        return
    assert certify(_bump(g, rng)).overall is not Overall.CERTIFIED
