"""Graph construction, generation, indexing, and mixing weights."""

import numpy as np
import pytest

from qnopt import (ConfigurationError, Graph, GraphGenerationError,
                   generate_graph, metropolis_weights)


def test_edges_are_canonicalized():
    g = Graph(4, [(2, 1), (1, 2), (3, 0), (0, 1), (2, 3)])
    assert g.edges == ((0, 1), (0, 3), (1, 2), (2, 3))
    assert g.num_edges == 4
    assert g.neighborhoods == ((1, 3), (0, 2), (1, 3), (0, 2))
    assert np.array_equal(g.degrees, [2, 2, 2, 2])


def test_single_agent_graph():
    g = Graph(1, [])
    assert g.is_connected()
    assert g.num_edges == 0


def test_self_loop_rejected():
    with pytest.raises(ConfigurationError):
        Graph(3, [(0, 1), (1, 1), (1, 2)])


def test_out_of_range_edge_rejected():
    with pytest.raises(ConfigurationError):
        Graph(3, [(0, 1), (1, 3)])


def test_disconnected_graph_rejected():
    with pytest.raises(ConfigurationError):
        Graph(4, [(0, 1), (2, 3)])
    with pytest.raises(ConfigurationError):
        Graph(3, [(0, 1)])  # isolated agent 2


def test_directed_index_consistency():
    g = generate_graph("erdos_renyi", 12, 0.4, seed=7)
    edge_dst, edge_ptr, edge_rev = g.directed_index()
    assert edge_ptr[0] == 0 and edge_ptr[-1] == 2 * g.num_edges
    assert len(edge_dst) == len(edge_rev) == 2 * g.num_edges
    # slice i lists exactly agent i's neighborhood, sorted
    for i in range(g.num_agents):
        sl = edge_dst[edge_ptr[i]:edge_ptr[i + 1]]
        assert tuple(sl) == g.neighborhoods[i]
    # reversal is an involution mapping (i, j) to (j, i)
    src = np.repeat(np.arange(g.num_agents), g.degrees)
    assert np.array_equal(edge_rev[edge_rev], np.arange(len(edge_rev)))
    assert np.array_equal(src[edge_rev], edge_dst)
    assert np.array_equal(edge_dst[edge_rev], src)


def test_ring_and_complete_topologies():
    ring = generate_graph("ring", 5)
    assert ring.num_edges == 5
    assert np.array_equal(ring.degrees, np.full(5, 2))
    two = generate_graph("ring", 2)
    assert two.edges == ((0, 1),)
    comp = generate_graph("complete", 6)
    assert comp.num_edges == 15
    assert np.array_equal(comp.degrees, np.full(6, 5))


def test_erdos_renyi_deterministic_in_seed():
    a = generate_graph("erdos_renyi", 10, 0.4, seed=3)
    b = generate_graph("erdos_renyi", 10, 0.4, seed=3)
    c = generate_graph("erdos_renyi", 10, 0.4, seed=4)
    assert a == b
    assert a.is_connected()
    assert a != c  # overwhelmingly likely for distinct seeds


def test_erdos_renyi_resamples_until_connected():
    # p small enough that single draws are usually disconnected, but
    # large enough that 100 attempts succeed for N=5
    g = generate_graph("erdos_renyi", 5, 0.35, seed=0)
    assert g.is_connected()


def test_erdos_renyi_gives_up_eventually():
    with pytest.raises(GraphGenerationError):
        generate_graph("erdos_renyi", 30, 0.01, seed=0)


def test_generate_graph_validation():
    with pytest.raises(ConfigurationError):
        generate_graph("star", 5)
    with pytest.raises(ConfigurationError):
        generate_graph("ring", 1)
    with pytest.raises(ConfigurationError):
        generate_graph("erdos_renyi", 5, edge_prob=0.0)
    with pytest.raises(ConfigurationError):
        generate_graph("erdos_renyi", 5, edge_prob=1.5)


def test_json_round_trip(tmp_path):
    g = generate_graph("erdos_renyi", 8, 0.5, seed=11)
    path = tmp_path / "graph.json"
    g.save(path)
    assert Graph.load(path) == g
    assert Graph.from_json_dict(g.to_json_dict()) == g


def test_metropolis_weights_doubly_stochastic():
    g = generate_graph("erdos_renyi", 9, 0.4, seed=5)
    w = metropolis_weights(g)
    assert np.allclose(w, w.T)
    assert np.allclose(w.sum(axis=0), 1.0)
    assert np.allclose(w.sum(axis=1), 1.0)
    assert np.all(w >= 0)
    # sparsity matches the graph off the diagonal
    for i in range(g.num_agents):
        for j in range(g.num_agents):
            if i != j:
                assert (w[i, j] > 0) == (j in g.neighborhoods[i])


def test_metropolis_weights_values():
    # path 0-1-2: deg = (1, 2, 1); edge weight 1/(1+max deg) = 1/3
    g = Graph(3, [(0, 1), (1, 2)])
    w = metropolis_weights(g)
    expect = np.array([[2 / 3, 1 / 3, 0.0],
                       [1 / 3, 1 / 3, 1 / 3],
                       [0.0, 1 / 3, 2 / 3]])
    assert np.allclose(w, expect)


def test_metropolis_second_eigenvalue_below_one():
    g = generate_graph("erdos_renyi", 10, 0.4, seed=1)
    vals = np.sort(np.abs(np.linalg.eigvalsh(metropolis_weights(g))))
    assert vals[-1] == pytest.approx(1.0)
    assert vals[-2] < 1.0  # connected graph mixes
