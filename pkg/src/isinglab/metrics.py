"""Accuracy and classification metrics.

KL divergence is always taken as KL(truth || prediction): the ground-truth
distribution weights the log ratio, so overconfident wrong predictions are
penalized hard.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConstantTruth, LengthMismatch
from .model import Marginals

_Q_CLAMP = 1e-12


def kl_divergence(p, q) -> float:
    """sum p ln(p/q) with q clamped to >= 1e-12; p == 0 terms contribute 0."""
    p = np.asarray(p, dtype=np.float64)
    q = np.asarray(q, dtype=np.float64)
    if p.shape != q.shape:
        raise LengthMismatch("distributions must have equal length")
    if np.any(p < 0) or np.any(q < 0) or abs(p.sum() - 1) > 1e-6 or abs(q.sum() - 1) > 1e-6:
        raise ValueError("inputs must be probability distributions")
    qc = np.maximum(q, _Q_CLAMP)
    terms = np.where(p > 0, p * (np.log(np.maximum(p, _Q_CLAMP)) - np.log(qc)), 0.0)
    return float(terms.sum())


def mean_node_kl(truth: Marginals, pred: Marginals) -> float:
    """Mean over nodes of KL(truth_i || pred_i)."""
    if truth.n != pred.n:
        raise LengthMismatch(f"node counts differ: {truth.n} vs {pred.n}")
    return float(
        np.mean([kl_divergence(truth.table[i], pred.table[i]) for i in range(truth.n)])
    )


def classify_nodes(marginals: Marginals, threshold: float = 0.5) -> set[int]:
    """Damaged node set: {i : p_plus(i) > threshold}, strict inequality."""
    if not 0.0 < threshold < 1.0:
        raise ValueError("threshold must lie in (0, 1)")
    return {i for i in range(marginals.n) if marginals.p_plus[i] > threshold}


@dataclass(frozen=True)
class ClassificationReport:
    tp: int
    fp: int
    tn: int
    fn: int
    fpr: float
    f1: float
    accuracy: float

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.tn + self.fn


def classification_report(predicted: set[int], damaged_set: set[int], n: int) -> ClassificationReport:
    """Counts against the damaged-set convention.

    The negative class is every node outside ``damaged_set``; FPR is the
    fraction of those nodes that were predicted damaged.
    """
    predicted = set(predicted)
    damaged_set = set(damaged_set)
    if not predicted <= set(range(n)) or not damaged_set <= set(range(n)):
        raise ValueError("node sets must be subsets of range(n)")
    complement = set(range(n)) - damaged_set
    fp = len(predicted & complement)
    tp = len(predicted & damaged_set)
    fn = len(damaged_set - predicted)
    tn = n - tp - fp - fn
    fpr = fp / len(complement) if complement else 0.0
    denom = 2 * tp + fp + fn
    f1 = 2 * tp / denom if denom else 0.0
    accuracy = (tp + tn) / n
    return ClassificationReport(tp, fp, tn, fn, fpr, f1, accuracy)


@dataclass(frozen=True)
class RegressionMetrics:
    r2: float
    mae: float
    mse: float
    rmse: float


def regression_metrics(truth, pred) -> RegressionMetrics:
    """R^2, MAE, MSE, RMSE over flattened per-node probabilities."""
    t = np.asarray(truth, dtype=np.float64).reshape(-1)
    p = np.asarray(pred, dtype=np.float64).reshape(-1)
    if t.size == 0 or t.shape != p.shape:
        raise LengthMismatch("truth and prediction must have equal nonzero length")
    ss_tot = float(np.sum((t - t.mean()) ** 2))
    if ss_tot == 0.0:
        raise ConstantTruth("R^2 undefined for constant truth")
    err = t - p
    mse = float(np.mean(err**2))
    return RegressionMetrics(
        r2=1.0 - float(np.sum(err**2)) / ss_tot,
        mae=float(np.mean(np.abs(err))),
        mse=mse,
        rmse=float(np.sqrt(mse)),
    )


REPORT_COLUMNS = ["algorithm", "case", "fpr", "f1", "accuracy", "runtime_s", "mean_kl"]


def report_row(algorithm: str, case: str, report: ClassificationReport,
               runtime_s: float, mean_kl: float | None) -> dict:
    return {
        "algorithm": algorithm,
        "case": case,
        "fpr": report.fpr,
        "f1": report.f1,
        "accuracy": report.accuracy,
        "runtime_s": runtime_s,
        "mean_kl": "" if mean_kl is None else mean_kl,
    }
