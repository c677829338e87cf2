import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from isinglab.errors import GenerationExhausted
from isinglab.model import (
    Graph,
    GraphSpec,
    IsingModel,
    Marginals,
    as_assignment,
    average_unique_node_degree,
    energy,
    generate_graph,
    is_connected,
    load_model,
    load_topology,
    model_from_dict,
    model_to_dict,
    random_tree,
    sample_model,
    save_model,
    zero_edges,
)


def test_graph_canonical_edge_order():
    g = Graph(4, ((3, 1), (0, 2), (1, 0)))
    assert g.edges == ((0, 1), (0, 2), (1, 3))
    assert g.neighbors(1) == (0, 3)
    assert g.degree(2) == 1


def test_graph_rejects_self_loop_duplicate_and_range():
    with pytest.raises(ValueError):
        Graph(3, ((1, 1),))
    with pytest.raises(ValueError):
        Graph(3, ((0, 1), (1, 0)))
    with pytest.raises(ValueError):
        Graph(3, ((0, 3),))


def test_aund_star():
    # degrees {3, 1, 1, 1} -> distinct {1, 3} -> mean 2
    g = Graph(4, ((0, 1), (0, 2), (0, 3)))
    assert average_unique_node_degree(g) == 2.0


def test_aund_path():
    g = Graph(3, ((0, 1), (1, 2)))
    assert average_unique_node_degree(g) == 1.5


def test_aund_triangle():
    g = Graph(3, ((0, 1), (1, 2), (0, 2)))
    assert average_unique_node_degree(g) == 2.0


def test_aund_isolated_node_counts_zero():
    g = Graph(3, ((0, 1),))
    assert average_unique_node_degree(g) == 0.5  # distinct degrees {0, 1}


def test_generate_graph_meets_spec():
    spec = GraphSpec(10, 2, 3)
    g = generate_graph(spec, seed=42)
    assert g.n == 10
    assert 2 <= average_unique_node_degree(g) <= 3
    assert is_connected(g)


def test_generate_graph_k4():
    # the only 4-node graph with every distinct degree equal to 3
    g = generate_graph(GraphSpec(4, 3, 3), seed=1)
    assert g.num_edges == 6


def test_generate_graph_infeasible_order():
    with pytest.raises(GenerationExhausted):
        generate_graph(GraphSpec(2, 5, 6), seed=0)


def test_generate_graph_no_3_regular_on_5_nodes():
    # 5*3 stubs is odd; no simple graph exists, budget must exhaust
    with pytest.raises(GenerationExhausted):
        generate_graph(GraphSpec(5, 3, 3), seed=0)


def test_generate_graph_deterministic():
    spec = GraphSpec(12, 2, 3)
    assert generate_graph(spec, seed=7).edges == generate_graph(spec, seed=7).edges


@settings(max_examples=40, deadline=None)
@given(
    order=st.integers(min_value=4, max_value=20),
    lo=st.sampled_from([1.0, 2.0, 3.0]),
    width=st.sampled_from([1.0, 2.0]),
    seed=st.integers(min_value=0, max_value=10**6),
)
def test_generate_graph_postconditions(order, lo, width, seed):
    spec = GraphSpec(order, lo, lo + width)
    try:
        g = generate_graph(spec, seed=seed)
    except GenerationExhausted:
        return
    assert g.n == order
    assert spec.aund_lo <= average_unique_node_degree(g) <= spec.aund_hi
    assert is_connected(g)
    degs = g.degrees()
    assert degs.min() <= average_unique_node_degree(g) <= degs.max()


def test_random_tree_is_tree():
    for seed in range(5):
        t = random_tree(9, seed)
        assert t.num_edges == 8
        assert is_connected(t)


def test_sample_model_deterministic():
    g = generate_graph(GraphSpec(8, 2, 3), seed=0)
    m1 = sample_model(g, seed=5)
    m2 = sample_model(g, seed=5)
    assert np.array_equal(m1.omega, m2.omega)
    assert np.array_equal(m1.b, m2.b)


def test_sample_model_distributions():
    # statistical check against the stated sampling distributions
    g = Graph(2, ((0, 1),))
    omegas = np.concatenate(
        [sample_model(g, seed=[9, k]).omega for k in range(100_000)]
    )
    assert abs(omegas.mean()) <= 0.02
    assert abs(omegas.std() - 1.0) <= 0.02
    big = Graph(100_000, ())
    b = sample_model(big, seed=11).b
    assert abs(b.std() - 0.25) <= 0.01


def test_energy_zero_params():
    g = Graph(3, ((0, 1), (1, 2)))
    m = IsingModel(g, np.zeros(2), np.zeros(3))
    assert energy(m, [1, -1, 1]) == 0.0


def test_energy_single_node():
    m = IsingModel(Graph(1, ()), np.zeros(0), np.array([0.5]))
    assert energy(m, [1]) == pytest.approx(0.5)
    assert energy(m, [-1]) == pytest.approx(-0.5)


def test_energy_two_nodes():
    m = IsingModel(Graph(2, ((0, 1),)), np.array([1.0]), np.zeros(2))
    assert energy(m, [1, -1]) == pytest.approx(-1.0)


def test_energy_linear_in_edge_weight():
    g = generate_graph(GraphSpec(6, 2, 3), seed=3)
    m = sample_model(g, seed=4)
    a = as_assignment([1, -1, 1, 1, -1, 1], 6)
    c = 2.5
    omega2 = m.omega.copy()
    omega2[0] *= c
    m2 = IsingModel(g, omega2, m.b)
    i, j = g.edges[0]
    expected_delta = (c - 1.0) * m.omega[0] * a[i] * a[j]
    assert energy(m2, a) - energy(m, a) == pytest.approx(expected_delta, abs=1e-12)


def test_zero_edges():
    g = Graph(2, ((0, 1),))
    m = IsingModel(g, np.array([1.2]), np.array([0.3, -0.1]))
    z = zero_edges(m)
    assert np.all(z.omega == 0)
    assert np.array_equal(z.b, m.b)
    assert m.omega[0] == 1.2  # input untouched
    zz = zero_edges(z)
    assert np.array_equal(zz.omega, z.omega)


def test_assignment_validation():
    with pytest.raises(ValueError):
        as_assignment([1, 0], 2)
    with pytest.raises(ValueError):
        as_assignment([1], 2)


def test_marginals_validation():
    Marginals(np.array([[0.2, 0.8]]))
    with pytest.raises(ValueError):
        Marginals(np.array([[0.5, 0.6]]))
    with pytest.raises(ValueError):
        Marginals(np.array([[1.2, -0.2]]))


def test_model_json_roundtrip(tmp_path):
    g = generate_graph(GraphSpec(7, 2, 3), seed=1)
    m = sample_model(g, seed=2)
    path = tmp_path / "model.json"
    save_model(m, path)
    loaded = load_model(path)
    assert loaded.graph.edges == m.graph.edges
    assert np.array_equal(loaded.omega, m.omega)
    assert np.array_equal(loaded.b, m.b)
    topo = load_topology(path)
    assert topo.edges == m.graph.edges


def test_model_dict_shape():
    g = Graph(3, ((2, 1), (0, 2)))
    m = IsingModel(g, np.array([0.1, 0.2]), np.zeros(3))
    doc = model_to_dict(m)
    assert doc["edges"] == [[0, 2], [1, 2]]
    m2 = model_from_dict(doc)
    assert m2.graph.edges == g.edges
