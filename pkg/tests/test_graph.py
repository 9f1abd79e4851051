import json

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from kgmi.errors import DomainError, DuplicateEdge, EdgeOrderViolation, InDegreeMismatch
from kgmi.graph import (NONUNIFORM, build_dag, dag_from_dict, diagnostics, disjoint_copies,
                        effective_sequence_length, meta_graph)


def test_five_node_graph():
    d = build_dag(5, [(1, 3), (1, 4), (2, 3), (2, 5), (3, 4), (4, 5)])
    assert d.roots == (1, 2)
    assert d.parents[3] == (1, 2)
    assert d.parents[4] == (1, 3)
    assert d.parents[5] == (2, 4)
    assert d.K == 2


def test_empty_graph():
    d = build_dag(3, [])
    assert d.roots == (1, 2, 3)
    assert all(d.in_degree(i) == 0 for i in (1, 2, 3))


def test_ten_node_graph():
    d = meta_graph("ten")
    assert len(d.edges) == 16
    assert d.roots == (1, 2)
    assert all(d.in_degree(i) == 2 for i in range(3, 11))


def test_meta_graphs():
    assert len(meta_graph("five").edges) == 6
    nu = meta_graph("nonuniform_ten")
    assert nu.mode == NONUNIFORM
    assert [i for i in range(1, 11) if nu.in_degree(i) == 1] == [3, 7, 9]
    assert [i for i in range(1, 11) if nu.in_degree(i) == 2] == [4, 5, 6, 8, 10]
    with pytest.raises(DomainError):
        meta_graph("eleven")


def test_validation_errors():
    with pytest.raises(EdgeOrderViolation):
        build_dag(3, [(2, 1)])
    with pytest.raises(EdgeOrderViolation):
        build_dag(3, [(1, 4)])
    with pytest.raises(DuplicateEdge):
        build_dag(3, [(1, 2), (1, 2)])
    with pytest.raises(InDegreeMismatch):
        build_dag(4, [(1, 3), (2, 3), (1, 4)])
    build_dag(4, [(1, 3), (2, 3), (1, 4)], mode=NONUNIFORM)


def test_adjacency_matches_edges():
    d = meta_graph("ten")
    A = d.adjacency
    assert A.sum() == 16
    for j, i in d.edges:
        assert A[j - 1, i - 1] == 1
    assert np.all(A.sum(axis=0)[2:] == 2)


def test_json_round_trip():
    d = meta_graph("nonuniform_ten")
    back = dag_from_dict(json.loads(d.to_json()))
    assert back == d
    rows = d.adjacency_csv().strip().split("\n")
    assert len(rows) == 10 and rows[0].split(",")[2] == "1"


def test_distances_ten():
    g = diagnostics(meta_graph("ten"))
    assert np.all(np.diag(g.dist) == 0)
    assert g.dist[0, 2] == 1
    assert np.array_equal(g.dist, g.dist.T)
    assert np.all(g.dist <= g.trek_dist)
    assert g.L_bound >= 1


def test_disjoint_components_are_infinite():
    d = disjoint_copies(meta_graph("five"), 2)
    g = diagnostics(d)
    assert np.isinf(g.dist[0, 5]) and np.isinf(g.trek_dist[0, 5])
    assert np.isfinite(g.trek_dist[0, 4])
    assert len(d.components()) == 2


def test_root_tuple_link():
    # roots 1 and 2 are drawn jointly, so they sit at distance 1
    g = diagnostics(meta_graph("ten"))
    assert g.trek_dist[0, 1] == 1
    # 3 and 4 share ancestor 1 (1->3, 1->4) and 3->4 directly
    assert g.trek_dist[2, 3] == 1


def test_effective_length():
    d = build_dag(4, [])
    assert effective_sequence_length(d, 0.3) == pytest.approx(4.0)
    d = meta_graph("ten")
    assert effective_sequence_length(d, 1e-9) == pytest.approx(10.0, rel=1e-6)
    with pytest.raises(DomainError):
        effective_sequence_length(d, 1.0)


@pytest.mark.parametrize("name", ["five", "ten", "nonuniform_ten"])
@pytest.mark.parametrize("lam", [0.05, 0.3, 0.5, 0.9])
def test_effective_length_bound(name, lam):
    d = meta_graph(name)
    g = diagnostics(d)
    assert effective_sequence_length(d, lam, g) >= d.T * (1 - lam) / g.L_bound


@settings(max_examples=40, deadline=None)
@given(st.integers(2, 9), st.data())
def test_random_dag_invariants(T, data):
    pairs = [(j, i) for i in range(2, T + 1) for j in range(1, i)]
    edges = data.draw(st.lists(st.sampled_from(pairs), unique=True, max_size=len(pairs)))
    d = build_dag(T, edges, mode=NONUNIFORM)
    A = d.adjacency
    assert {(j + 1, i + 1) for j, i in zip(*np.nonzero(A))} == set(edges)
    assert np.all(np.tril(A) == 0)
    g = diagnostics(d)
    assert np.all(g.dist <= g.trek_dist)
    assert np.all(np.isfinite(g.dist[np.isfinite(g.trek_dist)]))
    for comp in d.components():
        for a in comp:
            for b in comp:
                assert np.isfinite(g.dist[a - 1, b - 1])
