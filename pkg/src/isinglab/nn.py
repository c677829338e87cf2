"""Minimal dense/GRU substrate with hand-written backward passes.

The package uses a static reverse pass over a fixed computation rather than
a general autodiff tape: each primitive here ships a forward that caches
what its backward needs, and every backward is checked against central
finite differences in the test suite.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .errors import DimensionMismatch, UnsupportedPrimitive
from .util import Seed, rng_from_seed


def as_float(x) -> np.ndarray:
    """Coerce to an array, promoting integers to float64 but keeping wider floats.

    Forward passes follow the dtype of their inputs, so a gradient oracle can
    drive the same code at extended precision.
    """
    a = np.asarray(x)
    if not np.issubdtype(a.dtype, np.floating):
        a = a.astype(np.float64)
    return a


def relu(x: np.ndarray) -> np.ndarray:
    return np.maximum(x, 0.0)


def sigmoid(x: np.ndarray) -> np.ndarray:
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


_ACTIVATIONS = {
    "linear": lambda x: x,
    "relu": relu,
    "sigmoid": sigmoid,
    "tanh": np.tanh,
}


def glorot_uniform(rng: np.random.Generator, out_dim: int, in_dim: int) -> np.ndarray:
    limit = np.sqrt(6.0 / (in_dim + out_dim))
    return rng.uniform(-limit, limit, size=(out_dim, in_dim))


@dataclass(frozen=True)
class DenseLayer:
    """Affine map y = W x + b with W of shape (out_dim, in_dim)."""

    weights: np.ndarray
    biases: np.ndarray

    def __post_init__(self):
        if self.weights.ndim != 2 or self.biases.shape != (self.weights.shape[0],):
            raise DimensionMismatch("weights must be (out, in) with matching biases")

    @property
    def in_dim(self) -> int:
        return self.weights.shape[1]

    @property
    def out_dim(self) -> int:
        return self.weights.shape[0]


def init_dense(in_dim: int, out_dim: int, rng: np.random.Generator) -> DenseLayer:
    return DenseLayer(glorot_uniform(rng, out_dim, in_dim), np.zeros(out_dim))


def dense_forward(layer: DenseLayer, x: np.ndarray) -> np.ndarray:
    x = as_float(x)
    if x.shape[-1] != layer.in_dim:
        raise DimensionMismatch(
            f"input dim {x.shape[-1]} does not match layer in_dim {layer.in_dim}"
        )
    return x @ layer.weights.T + layer.biases


def dense_backward(layer: DenseLayer, x: np.ndarray, grad_out: np.ndarray):
    """Returns (grad_x, grad_weights, grad_biases) for a batched input."""
    gw = grad_out.T @ x
    gb = grad_out.sum(axis=0)
    gx = grad_out @ layer.weights
    return gx, gw, gb


def mlp_forward(layers, activations, x: np.ndarray) -> np.ndarray:
    """Affine-then-activation composition; activations are names per layer."""
    if len(layers) != len(activations):
        raise DimensionMismatch("one activation name per layer required")
    h = as_float(x)
    for layer, act in zip(layers, activations):
        if act not in _ACTIVATIONS:
            raise UnsupportedPrimitive(f"unknown activation {act!r}")
        h = _ACTIVATIONS[act](dense_forward(layer, h))
    return h


def mlp_forward_cached(layers, activations, x: np.ndarray):
    """Forward pass that keeps (input, pre-activation) per layer for backward."""
    h = as_float(x)
    cache = []
    for layer, act in zip(layers, activations):
        if act not in _ACTIVATIONS:
            raise UnsupportedPrimitive(f"unknown activation {act!r}")
        pre = dense_forward(layer, h)
        out = _ACTIVATIONS[act](pre)
        cache.append((h, pre, out, act))
        h = out
    return h, cache


def _activation_grad(act: str, pre: np.ndarray, out: np.ndarray, g: np.ndarray) -> np.ndarray:
    if act == "linear":
        return g
    if act == "relu":
        return g * (pre > 0)
    if act == "sigmoid":
        return g * out * (1.0 - out)
    if act == "tanh":
        return g * (1.0 - out * out)
    raise UnsupportedPrimitive(f"unknown activation {act!r}")


def mlp_backward(layers, cache, grad_out: np.ndarray):
    """Returns (grad_x, [(grad_W, grad_b) per layer])."""
    grads = [None] * len(layers)
    g = grad_out
    for idx in range(len(layers) - 1, -1, -1):
        x, pre, out, act = cache[idx]
        g = _activation_grad(act, pre, out, g)
        gx, gw, gb = dense_backward(layers[idx], x, g)
        grads[idx] = (gw, gb)
        g = gx
    return g, grads


@dataclass(frozen=True)
class GruCell:
    """GRU with gates computed from [h; x] and candidate from [r*h; x].

    z = sigma(Wz [h;x] + bz); r = sigma(Wr [h;x] + br);
    c = tanh(Wc [r*h; x] + bc); h' = (1 - z)*h + z*c.
    """

    w_update: np.ndarray
    w_reset: np.ndarray
    w_candidate: np.ndarray
    b_update: np.ndarray
    b_reset: np.ndarray
    b_candidate: np.ndarray

    def __post_init__(self):
        p = self.w_update.shape[0]
        cols = self.w_update.shape[1]
        for w in (self.w_reset, self.w_candidate):
            if w.shape != (p, cols):
                raise DimensionMismatch("gate matrices must share one shape")
        for b in (self.b_update, self.b_reset, self.b_candidate):
            if b.shape != (p,):
                raise DimensionMismatch("gate biases must have hidden_dim entries")

    @property
    def hidden_dim(self) -> int:
        return self.w_update.shape[0]

    @property
    def input_dim(self) -> int:
        return self.w_update.shape[1] - self.hidden_dim


def init_gru(hidden_dim: int, input_dim: int, rng: np.random.Generator) -> GruCell:
    cols = hidden_dim + input_dim
    return GruCell(
        glorot_uniform(rng, hidden_dim, cols),
        glorot_uniform(rng, hidden_dim, cols),
        glorot_uniform(rng, hidden_dim, cols),
        np.zeros(hidden_dim),
        np.zeros(hidden_dim),
        np.zeros(hidden_dim),
    )


def gru_step(cell: GruCell, h: np.ndarray, x: np.ndarray) -> np.ndarray:
    out, _ = gru_step_cached(cell, h, x)
    return out


def gru_step_cached(cell: GruCell, h: np.ndarray, x: np.ndarray):
    h = as_float(h)
    x = as_float(x)
    squeeze = h.ndim == 1
    if squeeze:
        h = h[None, :]
        x = x[None, :]
    if h.shape[1] != cell.hidden_dim or x.shape[1] != cell.input_dim:
        raise DimensionMismatch("h/x dims do not match the cell")
    hx = np.concatenate([h, x], axis=1)
    z = sigmoid(hx @ cell.w_update.T + cell.b_update)
    r = sigmoid(hx @ cell.w_reset.T + cell.b_reset)
    rhx = np.concatenate([r * h, x], axis=1)
    c = np.tanh(rhx @ cell.w_candidate.T + cell.b_candidate)
    out = (1.0 - z) * h + z * c
    cache = (h, x, hx, z, r, rhx, c)
    if squeeze:
        return out[0], cache
    return out, cache


def gru_backward(cell: GruCell, cache, grad_out: np.ndarray):
    """Returns (grad_h, grad_x, grads dict keyed like gru param names)."""
    h, x, hx, z, r, rhx, c = cache
    g = grad_out if grad_out.ndim == 2 else grad_out[None, :]
    p = cell.hidden_dim
    dh = g * (1.0 - z)
    dz = g * (c - h)
    dc = g * z
    da_c = dc * (1.0 - c * c)
    gw_c = da_c.T @ rhx
    gb_c = da_c.sum(axis=0)
    drhx = da_c @ cell.w_candidate
    dr = drhx[:, :p] * h
    dh += drhx[:, :p] * r
    dx = drhx[:, p:]
    da_z = dz * z * (1.0 - z)
    gw_z = da_z.T @ hx
    gb_z = da_z.sum(axis=0)
    dhx = da_z @ cell.w_update
    da_r = dr * r * (1.0 - r)
    gw_r = da_r.T @ hx
    gb_r = da_r.sum(axis=0)
    dhx += da_r @ cell.w_reset
    dh += dhx[:, :p]
    dx += dhx[:, p:]
    grads = {
        "w_update": gw_z,
        "w_reset": gw_r,
        "w_candidate": gw_c,
        "b_update": gb_z,
        "b_reset": gb_r,
        "b_candidate": gb_c,
    }
    return dh, dx, grads


@dataclass(frozen=True)
class AdamState:
    """First/second moment accumulators keyed like the parameter tree."""

    step: int
    m: dict
    v: dict
    learning_rate: float = 0.001
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8


def init_adam(params: dict, learning_rate: float = 0.001) -> AdamState:
    zeros = {k: np.zeros_like(v) for k, v in params.items()}
    return AdamState(0, zeros, {k: np.zeros_like(v) for k, v in params.items()},
                     learning_rate)


def adam_update(state: AdamState, params: dict, grads: dict):
    """Standard bias-corrected ADAM step; returns (new_params, new_state)."""
    step = state.step + 1
    bc1 = 1.0 - state.beta1**step
    bc2 = 1.0 - state.beta2**step
    new_params, new_m, new_v = {}, {}, {}
    for k, p in params.items():
        g = grads[k]
        if g.shape != p.shape:
            raise DimensionMismatch(f"gradient shape mismatch for {k}")
        m = state.beta1 * state.m[k] + (1.0 - state.beta1) * g
        v = state.beta2 * state.v[k] + (1.0 - state.beta2) * (g * g)
        new_params[k] = p - state.learning_rate * (m / bc1) / (np.sqrt(v / bc2) + state.eps)
        new_m[k] = m
        new_v[k] = v
    return new_params, replace(state, step=step, m=new_m, v=new_v)


def finite_difference_check(loss_and_grad, params: dict, step: float = 1e-5) -> float:
    """Max relative error between analytic gradients and central differences.

    ``loss_and_grad(params) -> (loss, grads)`` with grads keyed like params.
    """
    _, grads = loss_and_grad(params)
    worst = 0.0
    for key, value in params.items():
        flat = value.reshape(-1)
        for idx in range(flat.size):
            bumped = {k: v.copy() for k, v in params.items()}
            bumped[key].reshape(-1)[idx] = flat[idx] + step
            up, _ = loss_and_grad(bumped)
            bumped[key].reshape(-1)[idx] = flat[idx] - step
            down, _ = loss_and_grad(bumped)
            numeric = (up - down) / (2.0 * step)
            analytic = grads[key].reshape(-1)[idx]
            err = abs(analytic - numeric) / max(abs(analytic), abs(numeric), 1e-8)
            worst = max(worst, err)
    return worst
