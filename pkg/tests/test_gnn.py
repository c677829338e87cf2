import math

import numpy as np
import pytest

from isinglab.errors import CorruptFile, FormatVersionMismatch
from isinglab.exact import brute_force_marginals
from isinglab.gnn import (
    GnnDims,
    GnnParams,
    TrainConfig,
    cross_entropy_loss,
    gnn_forward,
    init_params,
    load_params,
    loss_and_grad,
    save_params,
    train,
)
from isinglab.metrics import mean_node_kl
from isinglab.model import Graph, GraphSpec, IsingModel, Marginals, generate_graph, sample_model
from isinglab.nn import finite_difference_check
from isinglab.util import rng_from_seed

SMALL_DIMS = GnnDims(hidden_dim=4, message_dim=4, msg_hidden=(12,), readout_hidden=(12,), steps=4)


def relabel(model, perm):
    """Oracle helper: apply a node permutation to a model."""
    g = model.graph
    new_edges = tuple((int(perm[i]), int(perm[j])) for i, j in g.edges)
    g2 = Graph(g.n, new_edges)
    weight = {tuple(sorted((int(perm[i]), int(perm[j])))): w
              for (i, j), w in zip(g.edges, model.omega)}
    omega2 = np.array([weight[e] for e in g2.edges])
    b2 = np.empty(g.n)
    b2[perm] = model.b
    return IsingModel(g2, omega2, b2)


def test_forward_output_valid_for_random_params():
    g = generate_graph(GraphSpec(7, 2, 3), seed=0)
    m = sample_model(g, seed=1)
    for seed in range(5):
        params = init_params(GnnDims(), seed=seed)
        out = gnn_forward(params, m)
        assert np.all(out.table >= 0)
        assert np.max(np.abs(out.table.sum(axis=1) - 1.0)) <= 1e-9


def test_forward_handles_isolated_nodes():
    m = IsingModel(Graph(3, ((0, 1),)), np.array([0.4]), np.zeros(3))
    params = init_params(GnnDims(), seed=2)
    out = gnn_forward(params, m)
    assert out.n == 3


def test_permutation_equivariance_bit_exact():
    params = init_params(GnnDims(), seed=3)
    for seed in range(5):
        g = generate_graph(GraphSpec(8, 2, 3), seed=[200, seed])
        m = sample_model(g, seed=[201, seed])
        perm = rng_from_seed([202, seed]).permutation(m.n)
        base = gnn_forward(params, m).table
        permuted = gnn_forward(params, relabel(m, perm)).table
        assert np.array_equal(permuted[perm], base)


def test_cross_entropy_uniform():
    n = 4
    uniform = Marginals(np.full((n, 2), 0.5))
    assert cross_entropy_loss(uniform, uniform) == pytest.approx(n * math.log(2.0), abs=1e-12)


def test_cross_entropy_perfect_prediction():
    label = Marginals(np.array([[1.0, 0.0], [0.0, 1.0]]))
    assert cross_entropy_loss(label, label) <= 2 * 1e-11


def test_cross_entropy_uninformative_prediction():
    label = Marginals(np.array([[1.0, 0.0]]))
    pred = Marginals(np.array([[0.5, 0.5]]))
    assert cross_entropy_loss(pred, label) == pytest.approx(math.log(2.0), abs=1e-12)


def test_end_to_end_gradient_small_architecture():
    g = generate_graph(GraphSpec(4, 2, 3), seed=5)
    m = sample_model(g, seed=6)
    label = brute_force_marginals(m)
    params = init_params(SMALL_DIMS, seed=7)

    def lg(tree):
        return loss_and_grad(GnnParams.from_tree(SMALL_DIMS, tree), [m], [label])

    assert finite_difference_check(lg, params.to_tree(), step=1e-5) <= 1e-4


def test_batched_loss_is_mean_of_singles():
    models, labels = [], []
    for seed in range(3):
        g = generate_graph(GraphSpec(5, 2, 3), seed=[210, seed])
        m = sample_model(g, seed=[211, seed])
        models.append(m)
        labels.append(brute_force_marginals(m))
    params = init_params(SMALL_DIMS, seed=8)
    batch_loss, _ = loss_and_grad(params, models, labels)
    singles = [float(loss_and_grad(params, [m], [lab])[0]) for m, lab in zip(models, labels)]
    assert float(batch_loss) == pytest.approx(np.mean(singles), rel=1e-12)


def test_overfit_single_model():
    g = generate_graph(GraphSpec(5, 2, 3), seed=9)
    m = sample_model(g, seed=10)
    label = brute_force_marginals(m)
    cfg = TrainConfig(learning_rate=0.005, epochs=1500, batch_size=1, seed=11)
    params, history = train([(m, label)], SMALL_DIMS, cfg)
    assert mean_node_kl(label, gnn_forward(params, m)) <= 1e-3
    assert history[-1] < history[0]


def test_training_deterministic():
    pairs = []
    for seed in range(6):
        g = generate_graph(GraphSpec(5, 2, 3), seed=[220, seed])
        m = sample_model(g, seed=[221, seed])
        pairs.append((m, brute_force_marginals(m)))
    cfg = TrainConfig(epochs=3, batch_size=2, seed=12)
    p1, h1 = train(pairs, SMALL_DIMS, cfg)
    p2, h2 = train(pairs, SMALL_DIMS, cfg)
    assert h1 == h2
    for k, v in p1.to_tree().items():
        assert np.array_equal(v, p2.to_tree()[k])


def test_loss_history_decreases_on_small_set():
    pairs = []
    for seed in range(20):
        g = generate_graph(GraphSpec(6, 2, 3), seed=[230, seed])
        m = sample_model(g, seed=[231, seed])
        pairs.append((m, brute_force_marginals(m)))
    params, history = train(pairs, SMALL_DIMS, TrainConfig(epochs=30, seed=13))
    assert history[-1] < history[0]


def test_save_load_roundtrip(tmp_path):
    params = init_params(GnnDims(), seed=14)
    path = tmp_path / "weights.json"
    save_params(params, path)
    loaded = load_params(path)
    assert loaded.dims == params.dims
    for k, v in params.to_tree().items():
        assert np.array_equal(v, loaded.to_tree()[k])


def test_load_wrong_version(tmp_path):
    params = init_params(SMALL_DIMS, seed=15)
    path = tmp_path / "weights.json"
    save_params(params, path)
    text = path.read_text().replace("isinglab-gnn-1", "isinglab-gnn-0")
    path.write_text(text)
    with pytest.raises(FormatVersionMismatch):
        load_params(path)


def test_load_truncated_file(tmp_path):
    params = init_params(SMALL_DIMS, seed=16)
    path = tmp_path / "weights.json"
    save_params(params, path)
    data = path.read_text()
    path.write_text(data[: len(data) // 2])
    with pytest.raises(CorruptFile):
        load_params(path)


def test_load_missing_tensor(tmp_path):
    import json

    params = init_params(SMALL_DIMS, seed=17)
    path = tmp_path / "weights.json"
    save_params(params, path)
    doc = json.loads(path.read_text())
    del doc["tensors"]["gru.w_update"]
    path.write_text(json.dumps(doc))
    with pytest.raises(CorruptFile):
        load_params(path)
