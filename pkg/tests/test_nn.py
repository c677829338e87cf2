import numpy as np
import pytest

from isinglab.errors import DimensionMismatch, UnsupportedPrimitive
from isinglab.nn import (
    AdamState,
    DenseLayer,
    GruCell,
    adam_update,
    dense_backward,
    dense_forward,
    finite_difference_check,
    glorot_uniform,
    gru_backward,
    gru_step,
    gru_step_cached,
    init_adam,
    init_dense,
    init_gru,
    mlp_backward,
    mlp_forward,
    mlp_forward_cached,
    relu,
    sigmoid,
)
from isinglab.util import rng_from_seed


def test_mlp_identity_layer():
    layer = DenseLayer(np.eye(3), np.zeros(3))
    x = np.array([1.0, -2.0, 0.5])
    assert np.allclose(mlp_forward([layer], ["linear"], x), x)


def test_mlp_relu_clamps():
    layer = DenseLayer(np.array([[1.0]]), np.array([-2.0]))
    assert mlp_forward([layer], ["relu"], np.array([1.0])) == pytest.approx([0.0])


def test_mlp_sigmoid_at_zero():
    layer = DenseLayer(np.zeros((4, 2)), np.zeros(4))
    out = mlp_forward([layer], ["sigmoid"], np.array([3.0, -1.0]))
    assert np.allclose(out, 0.5)


def test_mlp_dimension_mismatch():
    layer = DenseLayer(np.zeros((2, 3)), np.zeros(2))
    with pytest.raises(DimensionMismatch):
        mlp_forward([layer], ["linear"], np.zeros(4))


def test_mlp_unknown_activation():
    layer = DenseLayer(np.zeros((2, 2)), np.zeros(2))
    with pytest.raises(UnsupportedPrimitive):
        mlp_forward([layer], ["softplus"], np.zeros(2))


def test_gru_zero_everything():
    cell = GruCell(*(np.zeros((2, 5)) for _ in range(3)), *(np.zeros(2) for _ in range(3)))
    out = gru_step(cell, np.zeros(2), np.ones(3))
    assert np.allclose(out, 0.0)


def test_gru_zero_weights_halves_hidden():
    # z = 0.5 and candidate 0, so h' = 0.5 h regardless of input
    cell = GruCell(*(np.zeros((2, 5)) for _ in range(3)), *(np.zeros(2) for _ in range(3)))
    h = np.array([0.4, -0.8])
    out = gru_step(cell, h, np.ones(3))
    assert np.allclose(out, 0.5 * h)


def test_gru_output_bounded():
    rng = rng_from_seed(0)
    cell = init_gru(4, 3, rng)
    h = rng.uniform(-1, 1, size=4)
    for _ in range(50):
        h = gru_step(cell, h, rng.uniform(-1, 1, size=3))
        assert np.all(np.abs(h) < 1.0)


def test_gru_dimension_mismatch():
    rng = rng_from_seed(0)
    cell = init_gru(4, 3, rng)
    with pytest.raises(DimensionMismatch):
        gru_step(cell, np.zeros(5), np.zeros(3))


def test_dense_gradient_matches_fd():
    rng = rng_from_seed(1)
    layer = init_dense(3, 2, rng)
    x = rng.standard_normal((5, 3))
    target = rng.standard_normal((5, 2))

    def loss_and_grad(params):
        lay = DenseLayer(params["W"], params["b"])
        out = dense_forward(lay, x)
        loss = 0.5 * np.sum((out - target) ** 2)
        gx, gw, gb = dense_backward(lay, x, out - target)
        return loss, {"W": gw, "b": gb}

    err = finite_difference_check(loss_and_grad, {"W": layer.weights, "b": layer.biases})
    assert err <= 1e-6


@pytest.mark.parametrize("act", ["relu", "sigmoid", "tanh", "linear"])
def test_mlp_gradient_matches_fd(act):
    rng = rng_from_seed(2)
    layers = [init_dense(4, 6, rng), init_dense(6, 2, rng)]
    acts = [act, "sigmoid"]
    x = rng.standard_normal((7, 4)) + 0.1  # keep relu inputs off the kink
    target = rng.uniform(0.2, 0.8, size=(7, 2))

    def loss_and_grad(params):
        ls = [DenseLayer(params["W0"], params["b0"]), DenseLayer(params["W1"], params["b1"])]
        out, cache = mlp_forward_cached(ls, acts, x)
        loss = 0.5 * np.sum((out - target) ** 2)
        _, grads = mlp_backward(ls, cache, out - target)
        return loss, {"W0": grads[0][0], "b0": grads[0][1], "W1": grads[1][0], "b1": grads[1][1]}

    params = {
        "W0": layers[0].weights, "b0": layers[0].biases,
        "W1": layers[1].weights, "b1": layers[1].biases,
    }
    assert finite_difference_check(loss_and_grad, params) <= 1e-6


def test_gru_gradient_matches_fd():
    rng = rng_from_seed(3)
    cell = init_gru(3, 2, rng)
    h = rng.standard_normal((4, 3))
    x = rng.standard_normal((4, 2))
    target = rng.standard_normal((4, 3))
    names = ["w_update", "w_reset", "w_candidate", "b_update", "b_reset", "b_candidate"]

    def loss_and_grad(params):
        c = GruCell(**params)
        out, cache = gru_step_cached(c, h, x)
        loss = 0.5 * np.sum((out - target) ** 2)
        _, _, grads = gru_backward(c, cache, out - target)
        return loss, grads

    params = {k: getattr(cell, k) for k in names}
    assert finite_difference_check(loss_and_grad, params) <= 1e-6


def test_sigmoid_closed_form_gradient():
    # d/dw sigmoid(w * x) at w=0, x=1 is sigma'(0) = 0.25
    def loss_and_grad(params):
        w = params["w"][0]
        s = 1.0 / (1.0 + np.exp(-w))
        return s, {"w": np.array([s * (1 - s)])}

    _, grads = loss_and_grad({"w": np.zeros(1)})
    assert grads["w"][0] == pytest.approx(0.25)
    assert finite_difference_check(loss_and_grad, {"w": np.zeros(1)}) <= 1e-8


def test_shared_parameter_gradient_adds():
    x1, x2 = 1.5, -0.5

    def loss_and_grad(params):
        w = params["w"][0]
        return w * x1 + w * x2, {"w": np.array([x1 + x2])}

    assert finite_difference_check(loss_and_grad, {"w": np.array([0.3])}) <= 1e-9


def test_fd_check_quadratic():
    def loss_and_grad(params):
        w = params["w"][0]
        return w * w, {"w": np.array([2.0 * w])}

    assert finite_difference_check(loss_and_grad, {"w": np.array([3.0])}) <= 1e-8


def test_fd_check_empty_params():
    assert finite_difference_check(lambda p: (1.0, {}), {}) == 0.0


def test_adam_zero_gradient_keeps_params():
    params = {"w": np.array([1.0, -2.0])}
    state = init_adam(params, learning_rate=0.01)
    new_params, new_state = adam_update(state, params, {"w": np.zeros(2)})
    assert np.array_equal(new_params["w"], params["w"])
    assert new_state.step == 1


def test_adam_first_step_magnitude():
    # bias-corrected first step is ~ lr * sign(g)
    params = {"w": np.zeros(3)}
    g = np.array([0.5, -2.0, 10.0])
    state = init_adam(params, learning_rate=0.001)
    new_params, _ = adam_update(state, params, {"w": g})
    assert np.allclose(np.abs(new_params["w"]), 0.001, rtol=1e-6)
    assert np.array_equal(np.sign(new_params["w"]), -np.sign(g))


def test_adam_deterministic():
    rng = rng_from_seed(4)
    params = {"w": rng.standard_normal(4)}

    def run():
        p = {k: v.copy() for k, v in params.items()}
        s = init_adam(p)
        for step in range(5):
            g = {"w": np.sin(p["w"] + step)}
            p, s = adam_update(s, p, g)
        return p["w"]

    assert np.array_equal(run(), run())


def test_glorot_bounds():
    rng = rng_from_seed(5)
    w = glorot_uniform(rng, 30, 20)
    limit = np.sqrt(6.0 / 50.0)
    assert np.all(np.abs(w) <= limit)
