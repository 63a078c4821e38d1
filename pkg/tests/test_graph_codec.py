import math

import mpmath
import numpy as np
import pytest
from hypothesis import given

from ggmdl.graph import Graph
from ggmdl.graph_codec import (
    EPS,
    CoderKind,
    IncompatibleDimension,
    TrainedCoder,
    _triangle_contexts,
    codelength,
    codelength_degree,
    codelength_iid,
    codelength_triangle,
    codelength_with_trained,
    coding_events,
    parameter_overhead,
    train_coder,
)

from test_graph import graphs


def random_graph(rng, p, density):
    iu, ju = np.triu_indices(p, 1)
    keep = rng.random(iu.size) < density
    return Graph.from_edges(p, zip(iu[keep], ju[keep]))


def star(p, center=0):
    return Graph.from_edges(p, [(center, v) for v in range(p) if v != center])


# ---- adaptive coders: closed-form values ----------------------------------

def test_iid_p2_empty_is_one_bit():
    assert codelength_iid(Graph.empty(2)) == pytest.approx(1.0, abs=1e-12)


def test_iid_p3_empty():
    assert codelength_iid(Graph.empty(3)) == pytest.approx(math.log2(48 / 15), abs=1e-9)


def test_iid_flip_symmetry():
    assert codelength_iid(Graph.complete(3)) == pytest.approx(math.log2(48 / 15), abs=1e-12)


@given(graphs())
def test_iid_global_flip_symmetry(g):
    comp = Graph.from_edges(g.p, set(Graph.complete(g.p).edges) - g.edges)
    assert codelength_iid(comp) == pytest.approx(codelength_iid(g), rel=1e-12)


def test_degree_p2_empty():
    expected = math.log2(8 / 3) - math.log2(1 - EPS)
    assert codelength_degree(Graph.empty(2)) == pytest.approx(expected, abs=1e-12)


def test_degree_p3_triangle_by_hand():
    # Part 1: KT over "2","2","2" on alphabet {0,1,2} -> (1/2)/(3/2) * (3/2)/(5/2) * (5/2)/(7/2) = 1/7.
    # Part 2: budgets (2,2,2): slot probabilities 4/6, 1*2/4, 1*1/2, all edges present.
    expected = -math.log2(1 / 7) - math.log2(2 / 3) - math.log2(0.5) - math.log2(0.5)
    assert codelength_degree(Graph.complete(3)) == pytest.approx(expected, abs=1e-12)
    assert expected == pytest.approx(math.log2(42), abs=1e-12)


def test_degree_budget_exhausted_uses_eps():
    g = Graph.from_edges(3, [(0, 1)])
    # Degrees (1, 1, 0); the budget is spent after the first slot.
    part1 = [(0 + 0.5) / 1.5, (1 + 0.5) / 2.5, (0 + 0.5) / 3.5]
    part2 = [1 * 1 / 2, 1 - EPS, 1 - EPS]
    expected = -sum(math.log2(v) for v in part1 + part2)
    assert codelength_degree(g) == pytest.approx(expected, abs=1e-12)


def test_triangle_matches_iid_on_small_cases():
    assert codelength_triangle(Graph.empty(3)) == pytest.approx(math.log2(48 / 15), abs=1e-12)
    for g in (Graph.empty(2), Graph.complete(2)):
        assert codelength_triangle(g) == codelength_iid(g)


@pytest.mark.parametrize("p", [3, 5, 8, 12])
def test_triangle_equals_iid_on_stars(p):
    # Centered on the last vertex, no slot ever has a coded common neighbour.
    g = star(p, center=p - 1)
    assert all(ctx == 0 for ctx, _ in _triangle_contexts(g))
    assert codelength_triangle(g) == pytest.approx(codelength_iid(g), rel=1e-12)


def test_triangle_prefers_clustered_over_bipartite():
    # A triangle-free graph on 20 vertices has at most 100 edges, so the
    # clustered graph is K_15 minus 5 edges rather than a full 20-clique.
    bip = Graph.from_edges(20, [(i, j) for i in range(10) for j in range(10, 20)])
    clustered = Graph.from_edges(20, [(i, j) for i in range(15) for j in range(i + 1, 15)][:100])
    assert clustered.n_edges == bip.n_edges == 100
    assert codelength_triangle(clustered) < codelength_triangle(bip)


@pytest.mark.parametrize("kind", list(CoderKind))
@given(g=graphs())
def test_positive_and_deterministic(kind, g):
    a = codelength(g, kind)
    assert 0 < a < math.inf
    assert codelength(g, kind) == a


@given(graphs(min_p=3))
def test_iid_exchangeable(g):
    perm = np.random.default_rng(g.n_edges).permutation(g.p)
    assert codelength_iid(g.relabel(perm)) == pytest.approx(codelength_iid(g), rel=1e-12)


# ---- Kraft validity against high-precision accumulation --------------------

def _check_kraft(g, kind, trained=None):
    total = mpmath.mpf(1)
    with mpmath.workdps(60):
        for probs, sym in coding_events(g, kind, trained):
            assert all(0 < q < 1 for q in probs)
            assert math.fsum(probs) == pytest.approx(1.0, abs=1e-12)
            total *= mpmath.mpf(probs[sym])
        exact = float(-mpmath.log(total, 2))
    got = codelength(g, kind) if trained is None else codelength_with_trained(g, trained)
    assert got == pytest.approx(exact, rel=1e-9)


@pytest.mark.parametrize("kind", list(CoderKind))
def test_kraft_validity_random_graphs(kind):
    rng = np.random.default_rng(11)
    for _ in range(100):
        p = int(rng.integers(2, 11))
        g = random_graph(rng, p, rng.uniform(0, 1))
        _check_kraft(g, kind)
        _check_kraft(g, kind, train_coder(random_graph(rng, p, 0.3), kind))


# ---- statistical advantages -----------------------------------------------

def configuration_graph(degrees, rng):
    stubs = np.repeat(np.arange(len(degrees)), degrees)
    rng.shuffle(stubs)
    stubs = stubs[: len(stubs) // 2 * 2].reshape(-1, 2)
    return Graph.from_edges(len(degrees), [(a, b) for a, b in stubs if a != b])


@pytest.mark.slow
def test_degree_beats_iid_on_hub_configuration_model():
    rng = np.random.default_rng(5)
    degrees = np.r_[np.full(3, 15), np.full(27, 1)]
    gs = [configuration_graph(degrees, rng) for _ in range(100)]
    assert np.mean([codelength_degree(g) for g in gs]) < np.mean([codelength_iid(g) for g in gs])


@pytest.mark.slow
def test_triangle_beats_iid_on_planted_triangles():
    rng = np.random.default_rng(6)
    gs = []
    for _ in range(100):
        edges = []
        for _ in range(15):
            a, b, c = rng.choice(30, 3, replace=False)
            edges += [(a, b), (b, c), (a, c)]
        gs.append(Graph.from_edges(30, edges))
    assert np.mean([codelength_triangle(g) for g in gs]) < np.mean([codelength_iid(g) for g in gs])


# ---- trained coders ---------------------------------------------------------

def test_train_iid():
    assert train_coder(Graph.path(4), "iid").params == (0.5,)
    assert train_coder(Graph.empty(4), "iid").params == (EPS,)


def test_train_degree_path():
    hist = train_coder(Graph.path(4), "degree").params
    assert hist[1] == pytest.approx(2.5 / 6, rel=1e-5)
    assert hist[2] == pytest.approx(2.5 / 6, rel=1e-5)
    assert hist[0] == pytest.approx(0.5 / 6, rel=1e-5)
    assert math.fsum(hist) == pytest.approx(1.0, abs=1e-9)


@given(graphs())
def test_trained_params_clipped(g):
    for kind in CoderKind:
        c = train_coder(g, kind)
        assert all(EPS <= q <= 1 - EPS for q in c.params)
        if kind is CoderKind.DEGREE:
            assert math.fsum(c.params) == pytest.approx(1.0, abs=1e-9)


def test_trained_examples():
    half = TrainedCoder(CoderKind.IID, 3, (0.5,))
    assert codelength_with_trained(Graph.empty(3), half) == pytest.approx(3.0)
    tiny = TrainedCoder(CoderKind.IID, 3, (EPS,))
    assert codelength_with_trained(Graph.complete(3), tiny) == pytest.approx(-3 * math.log2(EPS))
    assert -3 * math.log2(EPS) == pytest.approx(59.79, abs=0.01)


@given(graphs())
def test_trained_iid_within_regret_bound(g):
    c = train_coder(g, "iid")
    assert codelength_with_trained(g, c) <= codelength_iid(g) + 0.5 * math.log2(g.n_slots) + 2


def test_trained_dimension_check():
    c = train_coder(Graph.path(4), "degree")
    with pytest.raises(IncompatibleDimension):
        codelength_with_trained(Graph.path(5), c)


def test_trained_round_trip():
    c = train_coder(Graph.path(6), "triangle")
    assert TrainedCoder.from_dict(c.to_dict()) == c


@pytest.mark.parametrize("kind, p, m, bits", [
    ("iid", 5, 256, 4.0),
    ("triangle", 5, 256, 8.0),
    ("degree", 43, 100, 21 * math.log2(100)),
])
def test_parameter_overhead(kind, p, m, bits):
    c = train_coder(Graph.empty(p), kind)
    assert parameter_overhead(c, m) == pytest.approx(bits)
    assert parameter_overhead(train_coder(Graph.empty(43), "degree"), 100) == pytest.approx(139.5, abs=0.05)


def test_parameter_overhead_needs_samples():
    with pytest.raises(ValueError):
        parameter_overhead(train_coder(Graph.empty(3), "iid"), 0)
