import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ggcnlab.errors import IndexOutOfRangeError, IsolatedNodeError, SelfLoopError
from ggcnlab.graph import (
    RENORMALIZED,
    ROW_NORMALIZED,
    build_graph,
    effective_homophily,
    empirical_effective_homophily,
    node_homophily,
    normalize,
    relative_degrees,
)

from conftest import random_graph


def test_dedup_and_orientation():
    g = build_graph([(1, 0), (0, 1), (0, 1), (2, 1)], 3)
    assert g.n_edges == 2
    assert g.edges.tolist() == [[0, 1], [1, 2]]
    assert g.degrees.tolist() == [1, 2, 1]


def test_rejects_self_loop_and_out_of_range():
    with pytest.raises(SelfLoopError):
        build_graph([(0, 0)], 2)
    with pytest.raises(IndexOutOfRangeError):
        build_graph([(0, 5)], 3)
    with pytest.raises(IndexOutOfRangeError):
        build_graph([(-1, 0)], 3)


def test_empty_graph():
    g = build_graph([], 4)
    assert g.n_edges == 0
    assert g.degrees.tolist() == [0, 0, 0, 0]
    with pytest.raises(IsolatedNodeError):
        node_homophily(g, [0, 0, 1, 1])


def test_csr_matches_edge_list(small_graph):
    g = small_graph
    for i in range(g.n):
        nbrs = sorted(
            v for u, v in g.edges.tolist() if u == i
        ) + sorted(u for u, v in g.edges.tolist() if v == i)
        assert sorted(nbrs) == g.neighbors(i).tolist()
    # src/dst cover both orientations exactly once
    assert g.src.shape == (2 * g.n_edges,)
    pairs = set(zip(g.src.tolist(), g.dst.tolist()))
    assert len(pairs) == 2 * g.n_edges


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 10_000), n=st.integers(3, 12))
def test_csr_random_graphs(seed, n):
    g = random_graph(np.random.default_rng(seed), n=n)
    assert g.indptr[-1] == 2 * g.n_edges
    assert int(g.degrees.sum()) == 2 * g.n_edges
    for i in range(n):
        nbrs = g.neighbors(i)
        assert (np.diff(nbrs) > 0).all()  # sorted, no duplicates
        for j in nbrs:
            assert i in g.neighbors(j)  # symmetric


def test_arrays_frozen(small_graph):
    with pytest.raises(ValueError):
        small_graph.degrees[0] = 7


def test_renormalized_entries(small_graph):
    g = small_graph
    a = normalize(g, RENORMALIZED).matrix
    dp1 = g.degrees + 1.0
    assert a.shape == (6, 6)
    assert np.allclose(np.diag(a), 1.0 / dp1)
    for u, v in g.edges:
        expect = 1.0 / np.sqrt(dp1[u] * dp1[v])
        assert a[u, v] == pytest.approx(expect)
        assert a[v, u] == pytest.approx(expect)
    assert np.allclose(a, a.T)
    # off-graph entries are zero
    assert a[0, 3] == 0.0


def test_row_normalized_rows_sum_to_one(small_graph):
    a = normalize(small_graph, ROW_NORMALIZED).matrix
    assert np.allclose(a.sum(axis=1), 1.0)


def test_unknown_scheme(small_graph):
    with pytest.raises(ValueError):
        normalize(small_graph, "spectral")


def test_node_homophily_brute_force(small_graph):
    labels = np.array([0, 0, 1, 1, 1, 0])
    stats = node_homophily(small_graph, labels)
    for i in range(small_graph.n):
        nbrs = small_graph.neighbors(i)
        expect = np.mean(labels[nbrs] == labels[i])
        assert stats.per_node_h[i] == pytest.approx(expect)
    assert stats.graph_h == pytest.approx(stats.per_node_h.mean())


def test_homophily_needs_no_isolated():
    g = build_graph([(0, 1)], 3)
    with pytest.raises(IsolatedNodeError):
        node_homophily(g, [0, 1, 0])


def test_relative_degrees(small_graph):
    g = small_graph
    stats = relative_degrees(g)
    dp1 = g.degrees + 1.0
    for i in range(g.n):
        nbrs = g.neighbors(i)
        rs = np.sqrt(dp1[i] / dp1[nbrs])
        assert stats.rbar[i] == pytest.approx(rs.mean())
        for j in nbrs:
            assert stats.r(i, int(j), g) == pytest.approx(np.sqrt(dp1[i] / dp1[j]))
    with pytest.raises(KeyError):
        stats.r(0, 3, g)


def test_effective_homophily(small_graph):
    signs = np.array([1.0, 1.0, -1.0, -1.0, 1.0, 1.0])
    eff = effective_homophily(small_graph, signs)
    for i in range(small_graph.n):
        nbrs = small_graph.neighbors(i)
        assert eff[i] == pytest.approx(np.mean(signs[nbrs] == signs[i]))


def test_empirical_effective_homophily(small_graph):
    labels = np.array([0, 0, 1, 1, 1, 0])
    correct = np.array([True, False, True, True, False, True])
    eff = empirical_effective_homophily(small_graph, labels, correct)
    for i in range(small_graph.n):
        nbrs = small_graph.neighbors(i)
        hit = (labels[nbrs] == labels[i]) & correct[nbrs]
        assert eff[i] == pytest.approx(hit.mean())
