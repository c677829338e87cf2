"""Shared experiment machinery: prediction dispatch, truth labeling,
sweep cells and timing comparisons.

Timing methodology: wall time of single-model inference measured with
``time.perf_counter``; the compare harness warms each algorithm once per
model and reports the median of a configurable number of repetitions.
"""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from . import bp as bp_mod
from . import gibbs as gibbs_mod
from .datasets import LabeledDataset, generate_dataset
from .exact import (
    ENUMERATION_BOUND,
    brute_force_marginals,
    elimination_width,
    ve_all_marginals,
)
from .gnn import GnnDims, GnnParams, TrainConfig, gnn_forward, train
from .metrics import mean_node_kl, regression_metrics
from .model import IsingModel, Marginals, average_unique_node_degree, zero_edges
from .potentials import derive_seed
from .util import Seed

ALGORITHMS = ("brute", "ve", "bp", "gibbs", "gnn")
VE_WIDTH_BOUND = 22  # largest factor scope VE will attempt


@dataclass(frozen=True)
class PredictConfig:
    bp: bp_mod.BpConfig = bp_mod.BpConfig()
    gibbs_burn: int = 1_000
    gibbs_sweeps: int = 10_000
    seed: Seed = 0
    zero_edges: bool = False


def predict(algorithm: str, model: IsingModel, cfg: PredictConfig = PredictConfig(),
            params: GnnParams | None = None) -> tuple[Marginals, float]:
    """Run one inference algorithm; returns (marginals, wall_seconds)."""
    if algorithm not in ALGORITHMS:
        raise ValueError(f"unknown algorithm {algorithm!r}")
    if cfg.zero_edges:
        model = zero_edges(model)
    if algorithm == "gnn" and params is None:
        raise ValueError("gnn prediction requires trained parameters")
    start = time.perf_counter()
    if algorithm == "brute":
        out = brute_force_marginals(model)
    elif algorithm == "ve":
        out = ve_all_marginals(model)
    elif algorithm == "bp":
        out = bp_mod.bp_marginals(model, cfg.bp).marginals
    elif algorithm == "gibbs":
        gc = gibbs_mod.GibbsConfig(cfg.gibbs_burn, cfg.gibbs_sweeps, cfg.seed)
        out = gibbs_mod.gibbs_marginals(model, gc)
    else:
        out = gnn_forward(params, model)
    return out, time.perf_counter() - start


def exact_feasible(model: IsingModel) -> bool:
    return model.n <= ENUMERATION_BOUND or elimination_width(model.graph) <= VE_WIDTH_BOUND


def exact_truth(model: IsingModel) -> Marginals:
    """Brute force when affordable, variable elimination otherwise."""
    if model.n <= 16:
        return brute_force_marginals(model)
    if elimination_width(model.graph) <= VE_WIDTH_BOUND:
        return ve_all_marginals(model)
    raise ValueError(
        f"exact truth infeasible: n={model.n}, "
        f"elimination width {elimination_width(model.graph)} > {VE_WIDTH_BOUND}"
    )


def surrogate_truth(model: IsingModel, seed: Seed, sweeps: int = 1_000_000) -> Marginals:
    """Long Gibbs chain used when exact labels are out of reach."""
    cfg = gibbs_mod.GibbsConfig(burn_in_sweeps=max(1, sweeps // 100),
                                sample_sweeps=sweeps, seed=seed)
    return gibbs_mod.gibbs_marginals(model, cfg)


def hash_seed(seed: int, *extra: int) -> int:
    """Fold stream indices into one integer seed for APIs that take ints."""
    out = np.random.SeedSequence([int(seed), *map(int, extra)]).generate_state(1)[0]
    return int(out)


def train_gnn_on_spec(order: int, aund: tuple[float, float], count: int, seed: int,
                      dims: GnnDims = GnnDims(),
                      train_cfg: TrainConfig | None = None) -> tuple[GnnParams, list, LabeledDataset]:
    """Generate a labeled training set and fit a GNN on it."""
    ds = generate_dataset(order, aund[0], aund[1], count, seed=hash_seed(seed, 0))
    cfg = train_cfg or TrainConfig(seed=[seed, 1])
    params, history = train(ds.pairs, dims, cfg)
    return params, history, ds


def eval_mean_kl(algorithm: str, dataset: LabeledDataset,
                 cfg: PredictConfig = PredictConfig(),
                 params: GnnParams | None = None) -> float:
    """Mean over models of the per-node KL(truth || prediction)."""
    kls = []
    for idx, (model, label) in enumerate(zip(dataset.models, dataset.labels)):
        c = (
            cfg
            if algorithm != "gibbs"
            else PredictConfig(cfg.bp, cfg.gibbs_burn, cfg.gibbs_sweeps,
                               derive_seed(cfg.seed, idx), cfg.zero_edges)
        )
        pred, _ = predict(algorithm, model, c, params)
        kls.append(mean_node_kl(label, pred))
    return float(np.mean(kls))


def eval_regression(algorithm: str, dataset: LabeledDataset,
                    cfg: PredictConfig = PredictConfig(),
                    params: GnnParams | None = None):
    """Regression metrics over flattened per-node p_plus across the test set."""
    truth, pred = [], []
    for idx, (model, label) in enumerate(zip(dataset.models, dataset.labels)):
        c = (
            cfg
            if algorithm != "gibbs"
            else PredictConfig(cfg.bp, cfg.gibbs_burn, cfg.gibbs_sweeps,
                               derive_seed(cfg.seed, idx), cfg.zero_edges)
        )
        out, _ = predict(algorithm, model, c, params)
        truth.append(label.p_plus)
        pred.append(out.p_plus)
    return regression_metrics(np.concatenate(truth), np.concatenate(pred))


SWEEP_COLUMNS = [
    "kind", "train_order", "train_aund_lo", "train_aund_hi", "train_count",
    "test_order", "test_aund_lo", "test_aund_hi", "test_count", "algorithm",
    "seed", "mean_kl", "r2", "mae", "mse", "rmse",
]


def sweep_cells(kind: str, *, order: int, aund: tuple[float, float],
                sizes: list[int] | None = None,
                train_aunds: list[tuple[float, float]] | None = None,
                test_aunds: list[tuple[float, float]] | None = None,
                train_order: int | None = None,
                test_orders: list[int] | None = None,
                train_count: int = 1000, test_count: int = 200,
                seed: int = 0, algorithms: tuple[str, ...] = ("gnn", "bp", "gibbs"),
                dims: GnnDims = GnnDims(), predict_cfg: PredictConfig = PredictConfig()):
    """Yield one result row per (cell, algorithm); rows appear as computed."""
    if kind == "samples":
        if not sizes:
            raise ValueError("samples sweep needs training-set sizes")
        cells = [
            {"train_order": order, "train_aund": aund, "train_count": s,
             "test_order": order, "test_aund": aund}
            for s in sizes
        ]
    elif kind == "degree":
        if not train_aunds or not test_aunds:
            raise ValueError("degree sweep needs train and test AUND ranges")
        cells = [
            {"train_order": order, "train_aund": ta, "train_count": train_count,
             "test_order": order, "test_aund": sa}
            for ta in train_aunds
            for sa in test_aunds
        ]
    elif kind == "order":
        if train_order is None or not test_orders:
            raise ValueError("order sweep needs a train order and test orders")
        cells = [
            {"train_order": train_order, "train_aund": aund, "train_count": train_count,
             "test_order": n, "test_aund": aund}
            for n in test_orders
        ]
    else:
        raise ValueError(f"unknown sweep kind {kind!r}")

    trained: dict[tuple, GnnParams] = {}
    for cell_idx, cell in enumerate(cells):
        train_key = (cell["train_order"], cell["train_aund"], cell["train_count"])
        if train_key not in trained:
            params, _, _ = train_gnn_on_spec(
                cell["train_order"], cell["train_aund"], cell["train_count"],
                seed=hash_seed(seed, 10, cell_idx), dims=dims,
            )
            trained[train_key] = params
        params = trained[train_key]
        labeler = "auto" if cell["test_order"] <= 16 else "ve"
        test = generate_dataset(
            cell["test_order"], cell["test_aund"][0], cell["test_aund"][1],
            test_count, seed=hash_seed(seed, 20, cell_idx), labeler=labeler,
        )
        for algorithm in algorithms:
            kl = eval_mean_kl(algorithm, test, predict_cfg, params)
            row = {
                "kind": kind,
                "train_order": cell["train_order"],
                "train_aund_lo": cell["train_aund"][0],
                "train_aund_hi": cell["train_aund"][1],
                "train_count": cell["train_count"],
                "test_order": cell["test_order"],
                "test_aund_lo": cell["test_aund"][0],
                "test_aund_hi": cell["test_aund"][1],
                "test_count": test_count,
                "algorithm": algorithm,
                "seed": seed,
                "mean_kl": kl,
                "r2": "", "mae": "", "mse": "", "rmse": "",
            }
            if kind == "order":
                reg = eval_regression(algorithm, test, predict_cfg, params)
                row.update(r2=reg.r2, mae=reg.mae, mse=reg.mse, rmse=reg.rmse)
            yield row


COMPARE_COLUMNS = [
    "model_index", "n", "aund", "algorithm", "runtime_s", "mean_kl", "truth",
]


def compare_rows(models: list[IsingModel], algorithms: tuple[str, ...],
                 cfg: PredictConfig = PredictConfig(),
                 params: GnnParams | None = None, reps: int = 5):
    """Yield per-(model, algorithm) timing/accuracy rows.

    Each algorithm is warmed once per model; the reported runtime is the
    median of ``reps`` further repetitions.
    """
    for idx, model in enumerate(models):
        truth = None
        truth_kind = ""
        if exact_feasible(model):
            truth = exact_truth(model)
            truth_kind = "exact"
        for algorithm in algorithms:
            c = PredictConfig(cfg.bp, cfg.gibbs_burn, cfg.gibbs_sweeps,
                              derive_seed(cfg.seed, idx), cfg.zero_edges)
            if algorithm in ("brute", "ve") and not exact_feasible(model):
                continue
            if algorithm == "brute" and model.n > ENUMERATION_BOUND:
                algorithm = "ve"
            predict(algorithm, model, c, params)  # warm
            times = []
            pred = None
            for _ in range(reps):
                pred, seconds = predict(algorithm, model, c, params)
                times.append(seconds)
            kl = mean_node_kl(truth, pred) if truth is not None else ""
            yield {
                "model_index": idx,
                "n": model.n,
                "aund": average_unique_node_degree(model.graph),
                "algorithm": algorithm,
                "runtime_s": float(np.median(times)),
                "mean_kl": kl,
                "truth": truth_kind,
            }
