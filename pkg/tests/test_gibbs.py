import itertools
import math

import numpy as np
import pytest

from isinglab.exact import brute_force_marginals
from isinglab.gibbs import GibbsConfig, gibbs_conditional, gibbs_marginals
from isinglab.model import Graph, GraphSpec, IsingModel, energy, generate_graph, sample_model


def test_conditional_isolated_node():
    m = IsingModel(Graph(1, ()), np.zeros(0), np.zeros(1))
    assert gibbs_conditional(m, 0, [1]) == pytest.approx(0.5)


def test_conditional_single_neighbor():
    m = IsingModel(Graph(2, ((0, 1),)), np.array([1.0]), np.zeros(2))
    assert gibbs_conditional(m, 0, [1, 1]) == pytest.approx(1.0 / (1.0 + math.exp(2.0)), abs=1e-12)


def test_conditional_field_only():
    m = IsingModel(Graph(2, ((0, 1),)), np.array([0.0]), np.array([0.5, 0.0]))
    assert gibbs_conditional(m, 0, [1, -1]) == pytest.approx(1.0 / (1.0 + math.e), abs=1e-12)


def test_conditional_consistent_with_energy_ratio():
    # p(theta_i=+1 | rest) must equal the two-state ratio of exp(-energy)
    for seed in range(5):
        g = generate_graph(GraphSpec(4, 2, 3), seed=[90, seed])
        m = sample_model(g, seed=[91, seed])
        for values in itertools.product([-1.0, 1.0], repeat=4):
            a = np.array(values)
            for i in range(4):
                up = a.copy()
                up[i] = 1.0
                down = a.copy()
                down[i] = -1.0
                w_up = math.exp(-energy(m, up))
                w_down = math.exp(-energy(m, down))
                expected = w_up / (w_up + w_down)
                assert gibbs_conditional(m, i, a) == pytest.approx(expected, abs=1e-12)


def test_marginals_deterministic():
    g = generate_graph(GraphSpec(6, 2, 3), seed=1)
    m = sample_model(g, seed=2)
    cfg = GibbsConfig(burn_in_sweeps=10, sample_sweeps=200, seed=3)
    a = gibbs_marginals(m, cfg)
    b = gibbs_marginals(m, cfg)
    assert np.array_equal(a.table, b.table)


def test_marginals_symmetric_model():
    g = generate_graph(GraphSpec(5, 2, 3), seed=4)
    m = IsingModel(g, np.zeros(g.num_edges), np.zeros(5))
    est = gibbs_marginals(m, GibbsConfig(burn_in_sweeps=100, sample_sweeps=10_000, seed=5))
    assert np.max(np.abs(est.table - 0.5)) <= 0.02


def test_marginals_match_brute_force():
    g = generate_graph(GraphSpec(8, 2, 3), seed=6)
    m = sample_model(g, seed=7)
    truth = brute_force_marginals(m)
    est = gibbs_marginals(m, GibbsConfig(burn_in_sweeps=1000, sample_sweeps=100_000, seed=8))
    assert np.max(np.abs(est.table - truth.table)) <= 0.02


def test_two_node_joint_detailed_balance():
    # empirical joint over a long chain vs enumerated joint, TV <= 0.01
    m = IsingModel(Graph(2, ((0, 1),)), np.array([0.8]), np.array([0.2, -0.1]))
    states = [(-1, -1), (-1, 1), (1, -1), (1, 1)]
    weights = np.array([math.exp(-energy(m, s)) for s in states])
    target = weights / weights.sum()

    # re-run the chain recording joint states (library only reports marginals)
    from isinglab.util import rng_from_seed

    rng = rng_from_seed(123)
    theta = [1, 1]
    counts = dict.fromkeys(states, 0)
    burn, keep = 1000, 1_000_000
    nbrs = {0: [(1, 0.8)], 1: [(0, 0.8)]}
    b = [0.2, -0.1]
    for t in range(burn + keep):
        u = rng.random(2)
        for i in (0, 1):
            field = b[i]
            for j, w in nbrs[i]:
                field += w * theta[j]
            p_plus = 1.0 / (1.0 + math.exp(2.0 * field))
            theta[i] = 1 if u[i] < p_plus else -1
        if t >= burn:
            counts[tuple(theta)] += 1
    empirical = np.array([counts[s] / keep for s in states])
    tv = 0.5 * np.abs(empirical - target).sum()
    assert tv <= 0.01


def test_config_validation():
    with pytest.raises(ValueError):
        GibbsConfig(burn_in_sweeps=0, sample_sweeps=10)
    with pytest.raises(ValueError):
        GibbsConfig(burn_in_sweeps=10, sample_sweeps=0)
