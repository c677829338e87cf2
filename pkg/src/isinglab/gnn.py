"""Message-passing GNN that maps an Ising model to per-node marginals.

Per unroll step, every directed edge (i -> j) emits a message
F(h_i, h_j, omega_ij, b_i, b_j); incoming messages are summed per node and
a shared GRU updates the hidden state.  After T steps a readout network
produces two sigmoid outputs per node which are normalized into a
distribution.

Incoming messages are summed in lexicographic order of the message vectors
within each destination node.  The order is a function of the message
values only, so relabeling the nodes of a graph permutes the outputs
bit-exactly (plain ascending-index order would not: float addition is not
associative and neighbor ranks change under relabeling).
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import CorruptFile, DimensionMismatch, FormatVersionMismatch
from .model import IsingModel, Marginals
from .nn import (
    AdamState,
    DenseLayer,
    GruCell,
    adam_update,
    gru_backward,
    gru_step_cached,
    init_adam,
    init_dense,
    init_gru,
    mlp_backward,
    mlp_forward_cached,
)
from .util import Seed, canonical_json, rng_from_seed

WEIGHT_FORMAT_VERSION = "isinglab-gnn-1"
PROB_CLAMP = 1e-12


@dataclass(frozen=True)
class GnnDims:
    """Architecture sizes: hidden/message widths, MLP layouts, unroll steps."""

    hidden_dim: int = 5
    message_dim: int = 5
    msg_hidden: tuple[int, ...] = (64, 64)
    readout_hidden: tuple[int, ...] = (64, 64)
    steps: int = 10

    def __post_init__(self):
        if min(self.hidden_dim, self.message_dim, self.steps) < 1:
            raise ValueError("hidden_dim, message_dim and steps must be >= 1")

    @property
    def message_input_dim(self) -> int:
        return 2 * self.hidden_dim + 3


def _msg_activations(dims: GnnDims) -> tuple[str, ...]:
    return ("relu",) * len(dims.msg_hidden) + ("linear",)


def _out_activations(dims: GnnDims) -> tuple[str, ...]:
    return ("relu",) * len(dims.readout_hidden) + ("sigmoid",)


@dataclass(frozen=True)
class GnnParams:
    """Weights of the three shared networks (message MLP, GRU, readout MLP)."""

    dims: GnnDims
    msg_layers: tuple[DenseLayer, ...]
    gru: GruCell
    out_layers: tuple[DenseLayer, ...]

    def to_tree(self) -> dict:
        tree = {}
        for i, layer in enumerate(self.msg_layers):
            tree[f"msg.{i}.W"] = layer.weights
            tree[f"msg.{i}.b"] = layer.biases
        for name in ("w_update", "w_reset", "w_candidate", "b_update", "b_reset", "b_candidate"):
            tree[f"gru.{name}"] = getattr(self.gru, name)
        for i, layer in enumerate(self.out_layers):
            tree[f"out.{i}.W"] = layer.weights
            tree[f"out.{i}.b"] = layer.biases
        return tree

    @classmethod
    def from_tree(cls, dims: GnnDims, tree: dict) -> "GnnParams":
        n_msg = len(dims.msg_hidden) + 1
        n_out = len(dims.readout_hidden) + 1
        msg = tuple(
            DenseLayer(tree[f"msg.{i}.W"], tree[f"msg.{i}.b"]) for i in range(n_msg)
        )
        out = tuple(
            DenseLayer(tree[f"out.{i}.W"], tree[f"out.{i}.b"]) for i in range(n_out)
        )
        gru = GruCell(
            tree["gru.w_update"],
            tree["gru.w_reset"],
            tree["gru.w_candidate"],
            tree["gru.b_update"],
            tree["gru.b_reset"],
            tree["gru.b_candidate"],
        )
        return cls(dims, msg, gru, out)


def init_params(dims: GnnDims, seed: Seed) -> GnnParams:
    rng = rng_from_seed(seed)
    widths = (dims.message_input_dim,) + dims.msg_hidden + (dims.message_dim,)
    msg = tuple(
        init_dense(widths[i], widths[i + 1], rng) for i in range(len(widths) - 1)
    )
    gru = init_gru(dims.hidden_dim, dims.message_dim, rng)
    owidths = (dims.hidden_dim,) + dims.readout_hidden + (2,)
    out = tuple(
        init_dense(owidths[i], owidths[i + 1], rng) for i in range(len(owidths) - 1)
    )
    return GnnParams(dims, msg, gru, out)


@dataclass(frozen=True)
class _Union:
    """Disjoint union of a batch of models; message passing factorizes over it."""

    n: int
    b: np.ndarray
    src: np.ndarray
    dst: np.ndarray
    w: np.ndarray
    node_model: np.ndarray  # model index per node


def _build_union(models: Sequence[IsingModel]) -> _Union:
    offsets = np.cumsum([0] + [m.n for m in models])
    n = int(offsets[-1])
    b = np.concatenate([m.b for m in models]) if models else np.zeros(0)
    srcs, dsts, ws = [], [], []
    for off, m in zip(offsets, models):
        if m.graph.num_edges == 0:
            continue
        srcs.append(m.edge_i + off)
        dsts.append(m.edge_j + off)
        srcs.append(m.edge_j + off)
        dsts.append(m.edge_i + off)
        ws.append(m.omega)
        ws.append(m.omega)
    src = np.concatenate(srcs) if srcs else np.zeros(0, dtype=np.int64)
    dst = np.concatenate(dsts) if dsts else np.zeros(0, dtype=np.int64)
    w = np.concatenate(ws) if ws else np.zeros(0)
    node_model = np.concatenate(
        [np.full(m.n, k, dtype=np.int64) for k, m in enumerate(models)]
    )
    return _Union(n, b, src, dst, w, node_model)


def _aggregate(messages: np.ndarray, dst: np.ndarray, n: int) -> np.ndarray:
    """Sum messages per destination in value-lexicographic order (canonical)."""
    q = messages.shape[1]
    if messages.shape[0] == 0:
        return np.zeros((n, q), dtype=messages.dtype)
    keys = tuple(messages[:, c] for c in range(q - 1, -1, -1)) + (dst,)
    order = np.lexsort(keys)
    d_sorted = dst[order]
    if messages.dtype == np.float64:
        out = np.empty((n, q))
        for c in range(q):
            out[:, c] = np.bincount(d_sorted, weights=messages[order, c], minlength=n)
        return out
    out = np.zeros((n, q), dtype=messages.dtype)  # bincount is float64-only
    np.add.at(out, d_sorted, messages[order])
    return out


def _forward_union(params: GnnParams, union: _Union, keep_cache: bool):
    dims = params.dims
    dtype = params.msg_layers[0].weights.dtype
    h = np.zeros((union.n, dims.hidden_dim), dtype=dtype)
    edge_feats = np.column_stack(
        [union.w, union.b[union.src], union.b[union.dst]]
    ).astype(dtype, copy=False)
    steps = []
    for _ in range(dims.steps):
        x = np.concatenate([h[union.src], h[union.dst], edge_feats], axis=1)
        msgs, msg_cache = mlp_forward_cached(params.msg_layers, _msg_activations(dims), x)
        agg = _aggregate(msgs, union.dst, union.n)
        h_new, gru_cache = gru_step_cached(params.gru, h, agg)
        if keep_cache:
            steps.append((msg_cache, gru_cache))
        h = h_new
    readout, out_cache = mlp_forward_cached(params.out_layers, _out_activations(dims), h)
    denom = readout.sum(axis=1, keepdims=True)
    probs = readout / denom
    cache = (steps, out_cache, readout, denom, probs) if keep_cache else None
    return probs, cache


def gnn_forward(params: GnnParams, model: IsingModel) -> Marginals:
    """Marginal estimates for one model; column 0 is p(theta=-1)."""
    probs, _ = _forward_union(params, _build_union([model]), keep_cache=False)
    return Marginals(probs)


def cross_entropy_loss(pred: Marginals, label: Marginals) -> float:
    """- sum over nodes and states of p_label * ln p_pred, with clamped logs."""
    if pred.n != label.n:
        raise DimensionMismatch("prediction and label node counts differ")
    clipped = np.clip(pred.table, PROB_CLAMP, 1.0 - PROB_CLAMP)
    return float(-(label.table * np.log(clipped)).sum())


def _loss_and_grad_union(params: GnnParams, union: _Union, labels: np.ndarray,
                         node_weight: np.ndarray):
    """Weighted cross-entropy over union nodes plus gradients for all params."""
    dims = params.dims
    probs, cache = _forward_union(params, union, keep_cache=True)
    steps, out_cache, readout, denom, _ = cache

    clipped = np.clip(probs, PROB_CLAMP, 1.0 - PROB_CLAMP)
    # numpy scalar, not float(): keeps extended precision when the oracle
    # drives the forward pass at a wider dtype
    loss = -(node_weight[:, None] * labels * np.log(clipped)).sum()

    grads = {k: np.zeros_like(v) for k, v in params.to_tree().items()}

    inside = (probs > PROB_CLAMP) & (probs < 1.0 - PROB_CLAMP)
    dprobs = np.where(inside, -node_weight[:, None] * labels / clipped, 0.0)
    # probs = readout / rowsum(readout)
    dreadout = (dprobs - (dprobs * probs).sum(axis=1, keepdims=True)) / denom

    dh, out_grads = mlp_backward(params.out_layers, out_cache, dreadout)
    for i, (gw, gb) in enumerate(out_grads):
        grads[f"out.{i}.W"] += gw
        grads[f"out.{i}.b"] += gb

    p = dims.hidden_dim
    for msg_cache, gru_cache in reversed(steps):
        dh_prev, dagg, gru_grads = gru_backward(params.gru, gru_cache, dh)
        for name, g in gru_grads.items():
            grads[f"gru.{name}"] += g
        dmsgs = dagg[union.dst]
        dx, msg_grads = mlp_backward(params.msg_layers, msg_cache, dmsgs)
        for i, (gw, gb) in enumerate(msg_grads):
            grads[f"msg.{i}.W"] += gw
            grads[f"msg.{i}.b"] += gb
        np.add.at(dh_prev, union.src, dx[:, :p])
        np.add.at(dh_prev, union.dst, dx[:, p : 2 * p])
        dh = dh_prev
    return loss, grads


def loss_and_grad(params: GnnParams, models: Sequence[IsingModel],
                  labels: Sequence[Marginals]):
    """Mean per-model cross-entropy over a batch and its parameter gradients."""
    union = _build_union(models)
    label_table = np.concatenate([lab.table for lab in labels])
    node_weight = np.full(union.n, 1.0 / len(models))
    return _loss_and_grad_union(params, union, label_table, node_weight)


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 0.001
    epochs: int = 100
    batch_size: int = 32
    seed: Seed = 0
    shuffle: bool = True

    def __post_init__(self):
        if self.learning_rate <= 0 or self.epochs < 1 or self.batch_size < 1:
            raise ValueError("bad training configuration")


def train(data, dims: GnnDims = GnnDims(), cfg: TrainConfig = TrainConfig()):
    """Supervised training on (model, exact-marginals) pairs.

    Returns (params, history) where history holds the per-epoch mean
    training loss.  Everything is a deterministic function of cfg.seed.
    """
    pairs = list(getattr(data, "pairs", data))
    if not pairs:
        raise ValueError("training data is empty")
    rng = rng_from_seed(cfg.seed)
    params = init_params(dims, rng.integers(0, 2**63 - 1))
    tree = params.to_tree()
    adam: AdamState = init_adam(tree, cfg.learning_rate)
    history = []
    indices = np.arange(len(pairs))
    for _ in range(cfg.epochs):
        if cfg.shuffle:
            rng.shuffle(indices)
        total = 0.0
        for start in range(0, len(pairs), cfg.batch_size):
            batch = [pairs[i] for i in indices[start : start + cfg.batch_size]]
            models = [m for m, _ in batch]
            labels = [lab for _, lab in batch]
            params = GnnParams.from_tree(dims, tree)
            loss, grads = loss_and_grad(params, models, labels)
            tree, adam = adam_update(adam, tree, grads)
            total += float(loss) * len(batch)
        history.append(total / len(pairs))
    return GnnParams.from_tree(dims, tree), history


# -- weight persistence ------------------------------------------------------


def save_params(params: GnnParams, path, extra: dict | None = None) -> None:
    """Write weights as one JSON document; round trip is bit-exact."""
    dims = params.dims
    doc = {
        "format_version": WEIGHT_FORMAT_VERSION,
        "dims": {
            "hidden_dim": dims.hidden_dim,
            "message_dim": dims.message_dim,
            "msg_hidden": list(dims.msg_hidden),
            "readout_hidden": list(dims.readout_hidden),
            "steps": dims.steps,
        },
        "tensors": {
            name: {"shape": list(arr.shape), "data": arr.reshape(-1)}
            for name, arr in params.to_tree().items()
        },
    }
    if extra:
        doc.update(extra)
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(canonical_json(doc))
        fh.write("\n")


def load_params(path) -> GnnParams:
    with open(path, "r", encoding="utf-8") as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise CorruptFile(f"{path}: {exc}") from exc
    if not isinstance(doc, dict) or "format_version" not in doc:
        raise CorruptFile(f"{path}: missing format_version")
    if doc["format_version"] != WEIGHT_FORMAT_VERSION:
        raise FormatVersionMismatch(
            f"{path}: version {doc['format_version']!r}, expected {WEIGHT_FORMAT_VERSION!r}"
        )
    try:
        d = doc["dims"]
        dims = GnnDims(
            hidden_dim=int(d["hidden_dim"]),
            message_dim=int(d["message_dim"]),
            msg_hidden=tuple(int(x) for x in d["msg_hidden"]),
            readout_hidden=tuple(int(x) for x in d["readout_hidden"]),
            steps=int(d["steps"]),
        )
        tree = {}
        for name, spec in doc["tensors"].items():
            arr = np.asarray(spec["data"], dtype=np.float64).reshape(spec["shape"])
            tree[name] = arr
        return GnnParams.from_tree(dims, tree)
    except (KeyError, TypeError, ValueError) as exc:
        raise CorruptFile(f"{path}: {exc}") from exc
