import math
import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ioss_cert.graph import (
    GraphError,
    InvalidWalkError,
    StabilityGraph,
    Vertex,
    Walk,
    build_graph,
    is_contractive,
    is_jointly_contractive,
    worst_dwell,
    xi_of,
    xi_worst,
)
from ioss_cert.model import simple_spec

from _oracles import corner_sup, random_graph


def test_example_weights(gd):
    assert [gd.w(v) for v in gd.ids] == [-3.5, 0.73, 0.73]
    assert gd.edges == {(1, 2): 0.0, (1, 3): pytest.approx(0.6931, abs=1e-4), (2, 1): 0.0, (3, 1): 0.0}
    assert gd.edges[(1, 3)] == math.log(2)


def test_single_vertex_no_edges():
    g = build_graph(simple_spec([("a", True, 2.0, 1.0, 1.0)]))
    assert g.ids == ("a",) and g.w("a") == -2.0 and g.edges == {}


def test_mu_one_is_zero_weight_exactly():
    g = build_graph(simple_spec([(1, True, 1, 1, 1), (2, False, 1, 1, 1)], [(1, 2, 1.0)]))
    assert g.edges[(1, 2)] == 0.0


@pytest.mark.parametrize("dwell, want", [((3.5, 4.0), -9.33), ((4.0, 3.5), -11.445)])
def test_xi_of_example(gd, dwell, want):
    assert xi_of(gd, Walk((1, 2, 1)), dwell) == pytest.approx(want, abs=1e-12)


def test_xi_of_zero_weights():
    g = StabilityGraph([Vertex("a", -1.0, 1, 1), Vertex("b", 1.0, 1, 1)], {("a", "b"): 0.0})
    g0 = StabilityGraph.from_weights({"a": -1e-300, "b": 1e-300}, {"a": (1, 1), "b": (1, 1)}, {("a", "b"): 0.0})
    assert xi_of(g0, Walk("ab"), [1.0]) == pytest.approx(0.0, abs=1e-299)
    assert xi_of(g, Walk("ab"), [1.0]) == -1.0


def test_xi_of_rejects_out_of_range_dwell(gd):
    with pytest.raises(InvalidWalkError, match="outside"):
        xi_of(gd, Walk((1, 2, 1)), [3.4, 4.0])
    with pytest.raises(InvalidWalkError, match="inadmissible"):
        xi_of(gd, Walk((2, 3)), [3.5])


@pytest.mark.parametrize("walk, want", [((1, 2, 1), -9.33), ((1, 3, 1), -8.64), ((2, 1, 2), -9.33), ((3, 1, 3), -8.64)])
def test_xi_worst_example(gd, walk, want):
    assert xi_worst(gd, Walk(walk)) == pytest.approx(want, abs=0.01)


def test_all_stable_walk():
    g = StabilityGraph([Vertex(0, -2.0, 1.0, 3.0), Vertex(1, -1.0, 0.5, 1.0)], {(0, 1): 0.0, (1, 0): 0.0})
    assert xi_worst(g, Walk((0, 1, 0))) == -(2.0 * 1.0 + 1.0 * 0.5)


def test_is_contractive(gd):
    v = is_contractive(gd, Walk((2, 1, 2)))
    assert v.verdict and v.margin == pytest.approx(9.33, abs=1e-12)


def test_all_unstable_never_contractive():
    g = StabilityGraph([Vertex(0, 1.0, 1, 2), Vertex(1, 0.1, 1, 2)], {(0, 1): 0.0, (1, 0): 0.3})
    assert not is_contractive(g, Walk((0, 1, 0, 1))).verdict


def test_boundary_zero_sum_fails_strict_check():
    g = StabilityGraph([Vertex("a", -1.0, 1, 1), Vertex("b", 1.0, 1, 1)], {("a", "b"): 0.0, ("b", "a"): 0.0})
    assert xi_worst(g, Walk("aba")) == 0.0
    v = is_contractive(g, Walk("aba"))
    assert not v.verdict and v.margin == 0.0


def test_joint(gd):
    j = is_jointly_contractive(gd, Walk((2, 1)), Walk((1, 3, 1)))
    assert j.verdict and -j.margin == pytest.approx(-5.677, abs=0.05)
    j = is_jointly_contractive(gd, Walk((3, 1)), Walk((1, 2, 1)))
    assert j.verdict and -j.margin == pytest.approx(-6.41, abs=0.01)
    with pytest.raises(InvalidWalkError):
        is_jointly_contractive(gd, Walk((1, 2)), Walk((1, 3, 1)))


def test_joint_reversal_all_stable():
    g = StabilityGraph([Vertex(0, -1.0, 1, 2), Vertex(1, -1.0, 1, 2), Vertex(2, -1.0, 1, 2)],
                       {(0, 1): 0.0, (1, 2): 0.0, (2, 1): 0.0, (1, 0): 0.0})
    assert is_jointly_contractive(g, Walk((0, 1, 2)), Walk((2, 1, 0))).verdict


def test_joint_equals_concatenation(gd):
    a, b = Walk((2, 1)), Walk((1, 3, 1, 2))
    assert xi_worst(gd, a) + xi_worst(gd, b) == pytest.approx(xi_worst(gd, a.concat(b)), abs=1e-12)


def test_graph_rejects_bad_input():
    with pytest.raises(GraphError):
        StabilityGraph([Vertex(0, 0.0, 1, 1)], {})
    with pytest.raises(GraphError):
        StabilityGraph([Vertex(0, 1.0, 2, 1)], {})
    with pytest.raises(GraphError):
        StabilityGraph([Vertex(0, 1.0, 1, 1), Vertex(1, 1.0, 1, 1)], {(0, 1): -0.1})
    with pytest.raises(GraphError):
        StabilityGraph([Vertex(0, 1.0, 1, 1)], {(0, 0): 0.0})


def test_walk_predicates():
    assert Walk((1, 2, 1)).is_cycle()
    assert Walk((1, 2, 3, 2, 1)).is_closed() and not Walk((1, 2, 3, 2, 1)).is_cycle()
    assert not Walk((1, 2, 1, 2, 1)).is_closed()
    assert Walk((1, 2, 3)).is_simple() and not Walk((1, 2, 1)).is_simple()
    assert Walk((1, 2, 3, 1)).rotate(1) == Walk((2, 3, 1, 2))


def _random_walk(rng, g, length):
    succ = {v: g.successors(v) for v in g.ids}
    starts = [v for v in g.ids if succ[v]]
    if not starts:
        return None
    vs = [rng.choice(starts)]
    while len(vs) < length and succ[vs[-1]]:
        vs.append(rng.choice(succ[vs[-1]]))
    return Walk(vs) if len(vs) > 1 else None


@given(st.integers(0, 10**6))
@settings(max_examples=60, deadline=None)
def test_supremum_property(seed):
    rng = random.Random(seed)
    g = random_graph(rng)
    walk = _random_walk(rng, g, rng.randint(2, 9))
    if walk is None:
        return
    sup = xi_worst(g, walk)
    for _ in range(200):
        dw = [rng.uniform(g.vertex(a).delta, g.vertex(a).Delta) for a in walk[:-1]]
        assert xi_of(g, walk, dw) <= sup + 1e-12
    assert abs(xi_of(g, walk, worst_dwell(g, walk)) - sup) <= 1e-12
    assert sup == pytest.approx(corner_sup(g, walk), abs=1e-12)


@given(st.integers(0, 10**6))
@settings(max_examples=60, deadline=None)
def test_additivity_over_concatenation(seed):
    rng = random.Random(seed)
    g = random_graph(rng, p_edge=0.6)
    walk = _random_walk(rng, g, 8)
    if walk is None or len(walk) < 3:
        return
    k = rng.randint(1, len(walk) - 2)
    a, b = Walk(walk[: k + 1]), Walk(walk[k:])
    assert xi_worst(g, a) + xi_worst(g, b) == pytest.approx(xi_worst(g, walk), abs=1e-9)
