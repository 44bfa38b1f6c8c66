import itertools

import networkx as nx
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from paqft.algebra import ProductContext
from paqft.functional import FormalSeries, PolyFunctional
from paqft.graphs import (Graph, GraphClass, articulation_vertices, bridges, classify, divergence_degree,
                          enumerate_graphs, graph_expansion, is_primitive, symmetry_factor)
from paqft.model import ModelSpec, build_model

FISH = Graph(2, (((0, 1), 2),))
SUNSET = Graph(2, (((0, 1), 3),))
TRIANGLE = Graph(3, (((0, 1), 1), ((1, 2), 1), ((0, 2), 1)))
POOL = enumerate_graphs(3, 3)


@pytest.mark.parametrize("n, cap, count", [(2, 2, 3), (3, 2, 10), (1, 5, 1), (2, 0, 1)])
def test_enumeration_counts(n, cap, count):
    assert len(enumerate_graphs(n, cap)) == count


def test_enumeration_count_by_stars_and_bars():
    # multigraphs on 4 labelled vertices with at most 3 edges over 6 pairs
    assert len(enumerate_graphs(4, 3)) == sum(len(list(itertools.combinations_with_replacement(range(6), k)))
                                              for k in range(4))


def test_symmetry_factors():
    assert [symmetry_factor(g) for g in enumerate_graphs(2, 2)] == [1, 1, 2]
    assert symmetry_factor(SUNSET) == 6
    assert isinstance(symmetry_factor(TRIANGLE), int)


@pytest.mark.parametrize("g, d, omega", [(FISH, 4, 0), (SUNSET, 4, 2), (FISH, 1, -3), (TRIANGLE, 6, 0)])
def test_divergence_table(g, d, omega):
    assert divergence_degree(g, d) == omega


def test_fish_scaling_degree_in_four_dimensions():
    # two lines of scaling degree 2 each, one relative coordinate of dimension 4
    sd = 2 * (4 - 2)
    assert sd == 4 and divergence_degree(FISH, 4) == sd - 4


def test_classification_examples():
    assert classify(Graph(3, (((0, 1), 1),))) is GraphClass.DISCONNECTED
    assert classify(Graph(3, (((0, 1), 1), ((1, 2), 2)))) is GraphClass.ONE_PARTICLE_REDUCIBLE
    bowtie = Graph(3, (((0, 1), 2), ((1, 2), 2)))
    assert classify(bowtie) is GraphClass.VERTEX_REDUCIBLE
    assert classify(FISH) is GraphClass.PRIMITIVE
    # every joined pair of vertices is itself irreducible
    assert classify(TRIANGLE) is GraphClass.NONPRIMITIVE
    assert classify(Graph(2)) is GraphClass.DISCONNECTED
    two_fishes = Graph(4, (((0, 1), 2), ((2, 3), 2), ((1, 2), 1)))
    assert classify(two_fishes) is GraphClass.ONE_PARTICLE_REDUCIBLE


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(1, 8))
def test_disjoint_union_laws(seed, d):
    rng = np.random.default_rng(seed)
    a, b = (POOL[i] for i in rng.integers(len(POOL), size=2))
    u = a.disjoint_union(b)
    assert symmetry_factor(u) == symmetry_factor(a) * symmetry_factor(b)
    # one fewer relative coordinate than the two pieces counted separately
    assert divergence_degree(u, d) == divergence_degree(a, d) + divergence_degree(b, d) - d


def test_multi_edge_is_not_a_bridge():
    assert bridges(FISH) == []
    assert bridges(Graph(2, (((0, 1), 1),))) == [(0, 1)]


simple_graphs = st.integers(2, 7).flatmap(
    lambda n: st.tuples(st.just(n), st.lists(st.sampled_from(list(itertools.combinations(range(n), 2))),
                                             unique=True, max_size=12)))


def as_networkx(n, edges):
    G = nx.Graph()
    G.add_nodes_from(range(n))
    G.add_edges_from(edges)
    return G


@settings(max_examples=100, deadline=None)
@given(simple_graphs)
def test_bridges_match_networkx(data):
    n, edges = data
    g = Graph(n, tuple((e, 1) for e in edges))
    want = sorted(tuple(sorted(e)) for e in nx.bridges(as_networkx(n, edges)))
    assert bridges(g) == want


@settings(max_examples=100, deadline=None)
@given(simple_graphs)
def test_articulation_vertices_match_networkx(data):
    n, edges = data
    g = Graph(n, tuple((e, 1) for e in edges))
    assert articulation_vertices(g) == sorted(nx.articulation_points(as_networkx(n, edges)))


@settings(max_examples=60, deadline=None)
@given(simple_graphs, st.randoms(use_true_random=False))
def test_classification_invariant_under_relabelling(data, rnd):
    n, edges = data
    g = Graph(n, tuple((e, 2 if i % 3 == 0 else 1) for i, e in enumerate(edges)))
    perm = list(range(n))
    rnd.shuffle(perm)
    assert classify(g) == classify(g.relabel(perm))
    assert symmetry_factor(g) == symmetry_factor(g.relabel(perm))


def test_primitive_requires_irreducible():
    assert not is_primitive(Graph(3, (((0, 1), 1), ((1, 2), 1))))


def test_graph_expansion_matches_iterated_product():
    spec = ModelSpec("qm", 1.0, 3.0, 10)
    props = build_model(spec)
    ctx = ProductContext(props, "timeordered_f")
    rng = np.random.default_rng(7)
    Fs = [PolyFunctional.local(spec, {4: rng.normal(size=spec.size), 2: rng.normal(size=spec.size)})
          for _ in range(3)]
    caps = (6, 0)
    iterated = FormalSeries({(0, 0): Fs[0]}, caps)
    for F in Fs[1:]:
        iterated = ctx(iterated, FormalSeries({(0, 0): F}, caps))
    gx = graph_expansion(Fs, ctx.kernel, caps)
    assert iterated.distance(gx) / max(iterated.max_abs(), 1.0) < 1e-9


def test_small_expansions():
    spec = ModelSpec("qm", 1.0, 2.0, 8)
    props = build_model(spec)
    K = props.feynman
    rng = np.random.default_rng(3)
    F = PolyFunctional.local(spec, {2: rng.normal(size=spec.size)})
    G = PolyFunctional.local(spec, {2: rng.normal(size=spec.size)})
    gx = graph_expansion([F, G], K)
    assert sorted(gx.coeffs) == [(0, 0), (1, 0), (2, 0)]
    assert gx.distance(ProductContext(props, "timeordered_f")(F, G, (2, 0))) < 1e-10
    lin = [PolyFunctional.linear(spec, rng.normal(size=spec.size)) for _ in range(3)]
    assert sorted(graph_expansion(lin, K).coeffs) == [(0, 0), (1, 0)]
    const = PolyFunctional.constant(spec, 2.5)
    only = graph_expansion([const, G], K)
    assert sorted(only.coeffs) == [(0, 0)] and only[(0, 0)].distance(G * 2.5) < 1e-14


def test_graph_rejects_self_loops():
    with pytest.raises(ValueError):
        Graph(2, (((1, 1), 1),))
