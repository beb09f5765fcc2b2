import io

import networkx as nx
import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from netbench import graph
from netbench.graph import INF, GraphFormatError


def nx_of(g):
    h = nx.DiGraph() if g.directed else nx.Graph()
    h.add_nodes_from(range(g.node_count))
    h.add_edges_from(g.edges().tolist())
    return h


@st.composite
def small_graphs(draw, max_n=12, directed=None):
    n = draw(st.integers(1, max_n))
    d = draw(st.booleans()) if directed is None else directed
    edges = draw(st.lists(st.tuples(st.integers(0, n - 1), st.integers(0, n - 1)),
                          max_size=3 * n))
    return graph.from_edges(n, edges, directed=d), edges


def test_from_edges_drops_loops_and_duplicates():
    g = graph.from_edges(3, [(0, 1), (1, 0), (0, 1), (2, 2)])
    assert g.edge_count == 1
    assert g.neighbors(0).tolist() == [1]
    assert g.neighbors(2).tolist() == []


def test_directed_keeps_reverse_adjacency():
    g = graph.from_edges(3, [(0, 1), (2, 1)], directed=True)
    assert g.in_neighbors(1).tolist() == [0, 2]
    assert g.neighbors(1).tolist() == []
    assert g.edge_count == 2


def test_from_edges_rejects_out_of_range():
    with pytest.raises(ValueError):
        graph.from_edges(2, [(0, 2)])


@given(small_graphs())
def test_csr_matches_networkx(data):
    g, edges = data
    h = nx_of(g)
    ref = nx.DiGraph() if g.directed else nx.Graph()
    ref.add_nodes_from(range(g.node_count))
    ref.add_edges_from((u, v) for u, v in edges if u != v)
    assert nx.utils.graphs_equal(h, ref)
    for v in range(g.node_count):
        assert g.neighbors(v).tolist() == sorted(ref.successors(v) if g.directed else ref[v])


def test_konect_style_file_is_one_based():
    text = "% sym unweighted\n% 3 4 4\n1 2\n2 3 1 12345\n3 4\n"
    g = graph.load_edge_list(text)
    assert g.node_count == 4
    assert g.edges().tolist() == [[0, 1], [1, 2], [2, 3]]


def test_zero_based_file_kept():
    g = graph.load_edge_list("# comment\n0 1\n1 2\n")
    assert g.node_count == 3


@pytest.mark.parametrize("text,line", [("1 2\n3\n", 2), ("1 x\n", 1), ("1 -2\n", 1)])
def test_parse_errors_carry_line(text, line):
    with pytest.raises(GraphFormatError) as exc:
        graph.load_edge_list(text)
    assert exc.value.line == line


def test_empty_file_rejected():
    with pytest.raises(GraphFormatError, match="no edges"):
        graph.load_edge_list("% only comments\n")


@given(small_graphs())
def test_serialization_round_trip(data):
    g, _ = data
    if g.edge_count == 0 or g.edges().min() != 0:
        # isolated boundary nodes are not representable in an edge list
        return
    back = graph.load_edge_list(graph.to_edge_list(g), directed=g.directed)
    top = int(g.edges().max()) + 1
    assert back.node_count == top
    assert np.array_equal(back.edges(), g.edges())


def test_read_from_stream():
    g = graph.read_edge_list(io.StringIO("1 2\n"))
    assert g.node_count == 2


@pytest.mark.parametrize("n,m,seed", [(10, 0, 0), (10, 45, 1), (100, 300, 7), (2, 1, 3)])
def test_gnm_counts(n, m, seed):
    g = graph.generate_gnm(n, m, seed)
    assert g.node_count == n
    assert g.edge_count == m


def test_gnm_deterministic_and_seed_sensitive():
    a = graph.generate_gnm(50, 100, 5)
    assert a.same_as(graph.generate_gnm(50, 100, 5))
    assert not a.same_as(graph.generate_gnm(50, 100, 6))


def test_gnm_rejects_too_many_edges():
    with pytest.raises(ValueError):
        graph.generate_gnm(4, 7, 0)


def test_gnm_pair_decoding_covers_all_pairs():
    # with m = all pairs, decoding must produce the complete graph
    assert graph.generate_gnm(9, 36, 0).same_as(graph.complete_graph(9))


def test_gnm_edge_frequencies_uniform():
    n, m, trials = 6, 5, 3000
    counts = np.zeros((n, n))
    for seed in range(trials):
        for u, v in graph.generate_gnm(n, m, seed).edges():
            counts[u, v] += 1
    expected = trials * m / 15
    freq = counts[np.triu_indices(n, 1)]
    assert np.all(np.abs(freq - expected) < 5 * np.sqrt(expected))


@given(small_graphs(), st.data())
def test_bfs_matches_networkx(data, pick):
    g, _ = data
    s = pick.draw(st.integers(0, g.node_count - 1))
    dist = graph.bfs(g, s)
    ref = nx.single_source_shortest_path_length(nx_of(g), s)
    for v in range(g.node_count):
        assert dist[v] == ref.get(v, INF)


def test_bfs_backward():
    g = graph.from_edges(3, [(0, 1), (1, 2)], directed=True)
    assert graph.bfs(g, 2, "backward").tolist() == [2, 1, 0]
    assert graph.bfs(g, 2)[0] == INF


def test_bfs_source_out_of_range():
    with pytest.raises(IndexError):
        graph.bfs(graph.path_graph(3), 3)


@given(small_graphs())
def test_largest_component_matches_networkx(data):
    g, _ = data
    sub, mapping = graph.largest_component(g)
    h = nx_of(g)
    comps = nx.strongly_connected_components(h) if g.directed else nx.connected_components(h)
    assert sub.node_count == max(len(c) for c in comps)
    expected = nx_of(g).subgraph(mapping.tolist())
    assert sub.edge_count == expected.number_of_edges()
    for u, v in sub.edges().tolist():
        assert h.has_edge(int(mapping[u]), int(mapping[v]))


def test_largest_component_preserves_order():
    g = graph.from_edges(6, [(0, 1), (3, 4), (4, 5)])
    sub, mapping = graph.largest_component(g)
    assert mapping.tolist() == [3, 4, 5]
    assert sub.edges().tolist() == [[0, 1], [1, 2]]


@pytest.mark.parametrize("g,d", [
    (graph.path_graph(10), 9), (graph.cycle_graph(9), 4), (graph.star_graph(20), 2),
    (graph.grid_graph(3, 5), 6), (graph.complete_graph(6), 1),
])
def test_diameter_exact(g, d):
    est = graph.estimate_diameter(g)
    assert est.lower == est.upper == d
    assert est.vertex_diameter_upper == d + 1


@pytest.mark.parametrize("seed", range(5))
def test_double_sweep_bounds_bracket_truth(seed):
    g, _ = graph.largest_component(graph.generate_gnm(300, 500, seed))
    truth = nx.diameter(nx_of(g))
    est = graph.estimate_diameter(g, seed=seed, exact_threshold=10)
    assert est.lower <= truth <= est.upper


def test_double_sweep_directed_bounds():
    rng = np.random.default_rng(1)
    edges = rng.integers(0, 150, size=(900, 2))
    g, _ = graph.largest_component(graph.from_edges(150, edges, directed=True))
    truth = nx.diameter(nx_of(g))
    est = graph.estimate_diameter(g, exact_threshold=1)
    assert est.lower <= truth <= est.upper


def test_double_sweep_exact_on_path():
    est = graph.estimate_diameter(graph.path_graph(2000), seed=3, exact_threshold=10)
    assert est.lower == 1999
