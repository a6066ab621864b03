import io

import numpy as np
import pytest
from hypothesis import given, strategies as st

from oracle import eigh, random_graph
from symspec.graph import (Graph, GraphParseError, MatrixKind, is_connected, lambda_max_bound,
                           largest_connected_component, load_edge_list, load_gml, load_report,
                           matvec, max_degree, write_edge_list)


def edge_lists(max_n=12):
    return st.integers(1, max_n).flatmap(
        lambda n: st.tuples(st.just(n), st.lists(st.tuples(st.integers(0, n - 1), st.integers(0, n - 1)),
                                                 max_size=3 * n)))


def test_path_from_text():
    g = load_edge_list(io.StringIO("0 1\n1 2"))
    assert (g.n, g.m) == (3, 2)
    assert g.degrees.tolist() == [1, 2, 1]


def test_reversed_duplicate_and_self_loop():
    g = load_edge_list(io.StringIO("0 1\n1 0\n2 2"))
    assert (g.n, g.m) == (3, 1)
    assert g.degrees.tolist() == [1, 1, 0]
    assert load_report(g) == {"self_loops": 1, "duplicates": 1}


def test_dedupe_disabled_rejects_duplicates():
    with pytest.raises(GraphParseError):
        load_edge_list(io.StringIO("0 1\n1 0\n"), dedupe=False)


def test_comments_labels_and_extra_columns():
    g = load_edge_list(io.StringIO("# header\n% other\nalice bob 3.5\nbob carol\n"))
    assert g.labels == ("alice", "bob", "carol")
    assert g.node_index("carol") == 2
    assert g.node_index(1) == 1


def test_malformed_line_reports_line_number():
    with pytest.raises(GraphParseError, match="line 2"):
        load_edge_list(io.StringIO("0 1\nlonely\n"))


def test_empty_input():
    with pytest.raises(GraphParseError):
        load_edge_list(io.StringIO("# nothing\n\n"))


def test_lesmis_size(lesmis_graph):
    assert (lesmis_graph.n, lesmis_graph.m) == (77, 254)
    assert lesmis_graph.node_index("Valjean") == 10


def test_gml_subset():
    text = """graph [ directed 0
      node [ id 5 label "a" ] node [ id 7 label "b" ] node [ id 9 label "c" ]
      edge [ source 5 target 7 value 2.0 ] edge [ source 7 target 5 ] edge [ source 9 target 9 ] ]"""
    g = load_gml(io.StringIO(text))
    assert (g.n, g.m) == (3, 1)
    assert g.labels == ("a", "b", "c")


def test_gml_unknown_node():
    with pytest.raises(GraphParseError):
        load_gml(io.StringIO("graph [ node [ id 1 ] edge [ source 1 target 2 ] ]"))


def test_lcc_tie_goes_to_smallest_index():
    edges = [(0, 1), (1, 2), (2, 0), (3, 4), (4, 5), (5, 3)]
    g = Graph.from_edges(7, edges)
    sub = largest_connected_component(g)
    assert (sub.n, sub.m) == (3, 3)
    assert sub.index_map.tolist() == [0, 1, 2]
    g2 = Graph.from_edges(7, [(4, 5), (5, 6), (6, 4), (0, 1), (1, 2), (2, 0)])
    assert largest_connected_component(g2).index_map.tolist() == [0, 1, 2]


def test_lcc_index_map_and_labels():
    g = load_edge_list(io.StringIO("x y\nz w\nw v\n"))
    sub = largest_connected_component(g)
    assert sub.labels == ("z", "w", "v")
    assert sub.index_map.tolist() == [2, 3, 4]


@pytest.mark.parametrize("x, expected", [((1, -1), (2, -2))])
def test_k2_matvec(x, expected, small):
    assert matvec(small["K2"], MatrixKind.LAPLACIAN, x).tolist() == list(expected)


def test_c4_alternating(small):
    assert matvec(small["C4"], "laplacian", [1, 0, -1, 0]).tolist() == [2, 0, -2, 0]


def test_matvec_length_mismatch(small):
    with pytest.raises(ValueError):
        matvec(small["K2"], MatrixKind.LAPLACIAN, [1, 2, 3])


def test_degree_bounds(small, lesmis_graph):
    p3 = small["P3"]
    assert (max_degree(p3), lambda_max_bound(p3)) == (2, 4.0)
    assert (max_degree(small["K2"]), lambda_max_bound(small["K2"])) == (1, 2.0)
    assert lambda_max_bound(small["K2"], MatrixKind.ADJACENCY) == 1.0
    lam = eigh(lesmis_graph)[0]
    assert max_degree(lesmis_graph) == 36
    assert lam[-1] <= lambda_max_bound(lesmis_graph)


@given(edge_lists())
def test_invariants(data):
    n, edges = data
    g = Graph.from_edges(n, edges)
    a = g.to_dense(MatrixKind.ADJACENCY)
    assert np.array_equal(a, a.T)
    assert not np.any(np.diag(a))
    assert g.degrees.sum() == 2 * g.m
    for u in range(n):
        nb = g.neighbors(u)
        assert np.all(np.diff(nb) > 0)


@given(edge_lists())
def test_laplacian_kills_ones(data):
    g = Graph.from_edges(*data)
    assert np.array_equal(matvec(g, MatrixKind.LAPLACIAN, np.ones(g.n)), np.zeros(g.n))


@given(edge_lists(), st.integers(0, 2**32 - 1))
def test_psd_on_random_vectors(data, seed):
    g = Graph.from_edges(*data)
    xs = np.random.default_rng(seed).standard_normal((1000, g.n))
    quad = np.einsum("ij,ij->i", xs, np.array([matvec(g, "laplacian", x) for x in xs]))
    assert np.all(quad >= -1e-12 * np.einsum("ij,ij->i", xs, xs))


@given(st.integers(1, 50), st.floats(0, 1), st.integers(0, 10_000))
def test_matvec_matches_dense(n, p, seed):
    g = random_graph(n, p, seed)
    x = np.random.default_rng(seed).standard_normal(n)
    for kind in MatrixKind:
        ref = g.to_dense(kind) @ x
        got = matvec(g, kind, x)
        assert np.linalg.norm(got - ref) <= 1e-13 * max(1.0, np.linalg.norm(ref))


@given(st.integers(1, 30), st.floats(0, 0.3), st.integers(0, 10_000))
def test_lcc_idempotent(n, p, seed):
    g = largest_connected_component(random_graph(n, p, seed))
    assert is_connected(g)
    again = largest_connected_component(g)
    assert np.array_equal(again.indices, g.indices) and np.array_equal(again.indptr, g.indptr)
    assert np.array_equal(again.index_map, g.index_map)


def test_edge_list_round_trip(lesmis_graph):
    buf = io.StringIO()
    write_edge_list(lesmis_graph, buf)
    back = load_edge_list(io.StringIO(buf.getvalue()))
    assert back.m == lesmis_graph.m
    assert sorted(back.labels) == sorted(lesmis_graph.labels)
