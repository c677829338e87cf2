"""Learning Ising parameters from feature data.

Node side: a BIC-selected Gaussian mixture fitted on intact-state feature
samples gives the intact density; the damaged-state density is the
max-entropy uniform over the 3-sigma domain of the intact data.  The
damage log-odds at the current feature mean are 0.5*(ln P_d - ln P_u).

Edge side: a 2-D mixture on paired intact samples yields a Monte-Carlo
mutual-information estimate, normalized by the MC entropies, linearly
mapped to a same-state probability p = 0.5*(1 + NMI) and converted to the
coupling omega = 0.5*(ln(1 - p) - ln p).
"""

from __future__ import annotations

import csv
import warnings
from dataclasses import dataclass

import numpy as np
from scipy.special import logsumexp

from .errors import (
    DataFormatError,
    DegenerateComponent,
    NonPositiveEntropy,
    ZeroVariance,
)
from .model import Graph, IsingModel
from .util import Seed, rng_from_seed

DENSITY_FLOOR = 1e-300
LOG_DENSITY_FLOOR = np.log(DENSITY_FLOOR)
VARIANCE_FLOOR = 1e-8
EM_TOL = 1e-7
EM_MAX_ITER = 500
P_SAME_CLAMP = 1.0 - 1e-6
DEFAULT_K_MAX = 10
DEFAULT_MI_SAMPLES = 100_000


@dataclass(frozen=True)
class Gmm:
    """Gaussian mixture over a 1-D or 2-D feature space."""

    weights: np.ndarray  # (K,)
    means: np.ndarray  # (K, D)
    covs: np.ndarray  # (K, D, D)

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=np.float64)
        mu = np.asarray(self.means, dtype=np.float64)
        cov = np.asarray(self.covs, dtype=np.float64)
        if w.ndim != 1 or mu.shape != (w.size, cov.shape[1]) or cov.shape[1] != cov.shape[2]:
            raise ValueError("inconsistent mixture shapes")
        if np.any(w < 0) or abs(w.sum() - 1.0) > 1e-9:
            raise ValueError("weights must be nonnegative and sum to 1")
        for k in range(w.size):
            try:
                np.linalg.cholesky(cov[k])
            except np.linalg.LinAlgError as exc:
                raise DegenerateComponent(f"component {k} covariance not SPD") from exc
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "means", mu)
        object.__setattr__(self, "covs", cov)

    @property
    def k(self) -> int:
        return self.weights.size

    @property
    def dim(self) -> int:
        return self.means.shape[1]

    def logpdf(self, x) -> np.ndarray:
        pts = _as_points(x, self.dim)
        return logsumexp(self._component_logpdf(pts) + np.log(self.weights), axis=1)

    def pdf(self, x) -> np.ndarray:
        return np.exp(self.logpdf(x))

    def _component_logpdf(self, pts: np.ndarray) -> np.ndarray:
        n, d = pts.shape
        out = np.empty((n, self.k))
        for k in range(self.k):
            chol = np.linalg.cholesky(self.covs[k])
            diff = pts - self.means[k]
            sol = np.linalg.solve(chol, diff.T)
            maha = np.sum(sol**2, axis=0)
            logdet = 2.0 * np.sum(np.log(np.diag(chol)))
            out[:, k] = -0.5 * (maha + logdet + d * np.log(2.0 * np.pi))
        return out

    def sample(self, count: int, rng: np.random.Generator) -> np.ndarray:
        comps = rng.choice(self.k, size=count, p=self.weights)
        out = np.empty((count, self.dim))
        for k in range(self.k):
            mask = comps == k
            m = int(mask.sum())
            if m == 0:
                continue
            chol = np.linalg.cholesky(self.covs[k])
            z = rng.standard_normal((m, self.dim))
            out[mask] = self.means[k] + z @ chol.T
        return out


def _as_points(x, dim: int) -> np.ndarray:
    pts = np.asarray(x, dtype=np.float64)
    if pts.ndim == 0:
        pts = pts.reshape(1, 1)
    elif pts.ndim == 1:
        pts = pts[:, None] if dim == 1 else pts[None, :]
    if pts.ndim != 2 or pts.shape[1] != dim:
        raise ValueError(f"points must have dimension {dim}")
    return pts


def _check_covs(covs: np.ndarray) -> None:
    for k in range(covs.shape[0]):
        eigmin = float(np.linalg.eigvalsh(covs[k]).min())
        if eigmin < VARIANCE_FLOOR:
            raise DegenerateComponent(
                f"component {k} variance {eigmin:.3e} below floor {VARIANCE_FLOOR}"
            )


def _kmeanspp_means(pts: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    n = pts.shape[0]
    means = [pts[rng.integers(0, n)]]
    for _ in range(1, k):
        d2 = np.min(
            [np.sum((pts - m) ** 2, axis=1) for m in means], axis=0
        )
        total = d2.sum()
        if total <= 0:
            means.append(pts[rng.integers(0, n)])
            continue
        means.append(pts[rng.choice(n, p=d2 / total)])
    return np.array(means)


def fit_gmm(samples, k: int, seed: Seed) -> Gmm:
    """EM fit with k-means++-style seeding.

    Stops when the total log-likelihood improves by less than 1e-7 or after
    500 iterations.  Raises :class:`DegenerateComponent` when a component
    covariance collapses below the variance floor.
    """
    pts = np.asarray(samples, dtype=np.float64)
    if pts.ndim == 1:
        pts = pts[:, None]
    n, d = pts.shape
    if n < k * (d + 1):
        raise ValueError(f"need at least {k * (d + 1)} samples to fit k={k}")
    rng = rng_from_seed(seed)
    means = _kmeanspp_means(pts, k, rng)
    base_cov = np.cov(pts.T, bias=True).reshape(d, d)
    covs = np.repeat(base_cov[None, :, :], k, axis=0)
    weights = np.full(k, 1.0 / k)
    _check_covs(covs)
    gmm = Gmm(weights, means, covs)
    prev_ll = -np.inf
    for _ in range(EM_MAX_ITER):
        log_comp = gmm._component_logpdf(pts) + np.log(gmm.weights)
        log_norm = logsumexp(log_comp, axis=1)
        ll = float(log_norm.sum())
        if ll - prev_ll < EM_TOL:
            break
        prev_ll = ll
        resp = np.exp(log_comp - log_norm[:, None])
        nk = resp.sum(axis=0)
        if np.any(nk < 1e-12):
            raise DegenerateComponent("a component lost all responsibility")
        weights = nk / n
        means = (resp.T @ pts) / nk[:, None]
        covs = np.empty((k, d, d))
        for j in range(k):
            diff = pts - means[j]
            covs[j] = (resp[:, j, None] * diff).T @ diff / nk[j]
        _check_covs(covs)
        gmm = Gmm(weights, means, covs)
    return gmm


def gmm_loglik(gmm: Gmm, samples) -> float:
    return float(gmm.logpdf(samples).sum())


def bic(gmm: Gmm, samples) -> float:
    """-2 log L + (free parameter count) ln N."""
    pts = _as_points(samples, gmm.dim)
    d = gmm.dim
    n_params = (gmm.k - 1) + gmm.k * d + gmm.k * d * (d + 1) // 2
    return -2.0 * gmm_loglik(gmm, pts) + n_params * np.log(pts.shape[0])


def select_k_bic(samples, k_max: int = DEFAULT_K_MAX, seed: Seed = 0) -> tuple[int, Gmm]:
    """Fit K = 1..k_max and keep the BIC minimizer (ties favor smaller K)."""
    if k_max < 1:
        raise ValueError("k_max must be >= 1")
    best = None
    for k in range(1, k_max + 1):
        try:
            gmm = fit_gmm(samples, k, derive_seed(seed, k))
        except (DegenerateComponent, ValueError) as exc:
            warnings.warn(f"skipping K={k}: {exc}", stacklevel=2)
            continue
        score = bic(gmm, samples)
        if best is None or score < best[0]:
            best = (score, k, gmm)
    if best is None:
        raise DegenerateComponent("every candidate K failed to fit")
    return best[1], best[2]


def derive_seed(seed: Seed, *extra: int) -> list[int]:
    """Extend a seed with stream indices so sub-tasks get independent RNGs."""
    base = list(seed) if isinstance(seed, (list, tuple)) else [seed]
    return [int(x) for x in base] + [int(x) for x in extra]


@dataclass(frozen=True)
class DamageDomain:
    """Plausible feature range for the damaged state (3-sigma rule)."""

    lower: float
    upper: float

    def __post_init__(self):
        if not self.lower < self.upper:
            raise ValueError("lower bound must be below upper bound")

    @property
    def uniform_density(self) -> float:
        return 1.0 / (self.upper - self.lower)

    def contains(self, x: float) -> bool:
        return self.lower <= x <= self.upper


def damage_domain(samples) -> DamageDomain:
    """[mean - 3 sigma, mean + 3 sigma] using the population (1/n) std."""
    pts = np.asarray(samples, dtype=np.float64)
    if pts.size < 2:
        raise ValueError("need at least two samples")
    mu = float(pts.mean())
    sigma = float(pts.std())  # population convention, pinned
    if sigma == 0.0:
        raise ZeroVariance("samples have zero spread")
    return DamageDomain(mu - 3.0 * sigma, mu + 3.0 * sigma)


def node_potential(intact_density: float, damaged_density: float) -> float:
    """Damage log-odds 0.5*(ln P_d - ln P_u) with floored densities."""
    p_u = max(float(intact_density), DENSITY_FLOOR)
    p_d = max(float(damaged_density), DENSITY_FLOOR)
    return 0.5 * (np.log(p_d) - np.log(p_u))


def _mi_terms(joint: Gmm, marg_i: Gmm, marg_j: Gmm, n_samples: int, seed: Seed):
    """One sampling pass shared by the MI estimate and both entropy terms."""
    if joint.dim != 2 or marg_i.dim != 1 or marg_j.dim != 1:
        raise ValueError("joint must be 2-D with 1-D marginals")
    if n_samples < 1:
        raise ValueError("need at least one sample")
    rng = rng_from_seed(seed)
    pts = joint.sample(n_samples, rng)
    lp_joint = np.maximum(joint.logpdf(pts), LOG_DENSITY_FLOOR)
    lp_i = np.maximum(marg_i.logpdf(pts[:, 0]), LOG_DENSITY_FLOOR)
    lp_j = np.maximum(marg_j.logpdf(pts[:, 1]), LOG_DENSITY_FLOOR)
    mi = float(np.mean(lp_joint - lp_i - lp_j))
    return mi, float(-np.mean(lp_i)), float(-np.mean(lp_j))


def mutual_information_mc(joint: Gmm, marg_i: Gmm, marg_j: Gmm,
                          n_samples: int, seed: Seed) -> float:
    """(1/N) sum ln of the joint/product density ratio at joint samples."""
    mi, _, _ = _mi_terms(joint, marg_i, marg_j, n_samples, seed)
    return mi


def normalized_mi(mi: float, entropy_i: float, entropy_j: float) -> float:
    """mi / sqrt(entropy_i * entropy_j), clamped to [0, 1]."""
    if entropy_i <= 0.0 or entropy_j <= 0.0:
        raise NonPositiveEntropy(
            f"entropy estimates must be positive, got {entropy_i}, {entropy_j}"
        )
    return float(np.clip(mi / np.sqrt(entropy_i * entropy_j), 0.0, 1.0))


def edge_probability(nmi: float) -> float:
    """Same-state probability by linear interpolation: 0.5*(1 + NMI)."""
    if not 0.0 <= nmi <= 1.0:
        raise ValueError("normalized MI must lie in [0, 1]")
    return 0.5 * (1.0 + nmi)


def edge_potential(p_same: float) -> float:
    """omega = 0.5*(ln(1 - p) - ln p), with p clamped below 1 to stay finite."""
    if not 0.5 <= p_same <= 1.0:
        raise ValueError("same-state probability must lie in [0.5, 1]")
    p = min(p_same, P_SAME_CLAMP)
    return 0.5 * (np.log(1.0 - p) - np.log(p))


def build_model(topology: Graph, features: np.ndarray, current_means,
                k_max: int = DEFAULT_K_MAX, mi_samples: int = DEFAULT_MI_SAMPLES,
                seed: Seed = 0) -> IsingModel:
    """Run the full potential-learning pipeline on one feature matrix.

    ``features`` holds intact-state measurements, one column per node;
    ``current_means`` is the per-node mean feature of the structure being
    assessed.  Node evidence enters the energy with a flipped sign: the
    energy convention p ~ exp(-b theta) makes theta=+1 (damaged) more
    probable when b is negative, so b_i = -(damage log-odds).
    """
    feats = np.asarray(features, dtype=np.float64)
    d_bar = np.asarray(current_means, dtype=np.float64)
    if feats.ndim != 2 or feats.shape[1] != topology.n:
        raise ValueError("features must have one column per node")
    if d_bar.shape != (topology.n,):
        raise ValueError("one current mean per node required")

    node_gmms: list[Gmm] = []
    b = np.empty(topology.n)
    for i in range(topology.n):
        col = feats[:, i]
        try:
            _, gmm = select_k_bic(col, k_max, derive_seed(seed, 1, i))
            domain = damage_domain(col)
        except Exception as exc:
            raise type(exc)(f"node {i}: {exc}") from exc
        node_gmms.append(gmm)
        p_u = float(gmm.pdf(d_bar[i])[0])
        if domain.contains(d_bar[i]):
            p_d = domain.uniform_density
        else:
            p_d = DENSITY_FLOOR
            warnings.warn(
                f"node {i}: current mean {d_bar[i]:.4g} outside damage domain "
                f"[{domain.lower:.4g}, {domain.upper:.4g}]; density floored",
                stacklevel=2,
            )
        b[i] = -node_potential(p_u, p_d)

    omega = np.empty(topology.num_edges)
    for e, (i, j) in enumerate(topology.edges):
        try:
            _, joint = select_k_bic(feats[:, [i, j]], k_max, derive_seed(seed, 2, e))
            mi, ent_i, ent_j = _mi_terms(
                joint, node_gmms[i], node_gmms[j], mi_samples, derive_seed(seed, 3, e)
            )
            nmi = normalized_mi(mi, ent_i, ent_j)
        except Exception as exc:
            raise type(exc)(f"edge ({i}, {j}): {exc}") from exc
        omega[e] = edge_potential(edge_probability(nmi))
    return IsingModel(topology, omega, b)


# -- CSV interfaces ----------------------------------------------------------


def load_feature_csv(path) -> np.ndarray:
    """Feature matrix: header row of node indices, one row per measurement."""
    with open(path, "r", encoding="utf-8", newline="") as fh:
        rows = list(csv.reader(fh))
    if len(rows) < 2:
        raise DataFormatError(f"{path}: need a header row and at least one data row")
    try:
        header = [int(c) for c in rows[0]]
    except ValueError as exc:
        raise DataFormatError(f"{path}: header must hold node indices: {exc}") from exc
    if sorted(header) != list(range(len(header))):
        raise DataFormatError(f"{path}: header must be a permutation of 0..n-1")
    try:
        data = np.asarray([[float(c) for c in row] for row in rows[1:]])
    except ValueError as exc:
        raise DataFormatError(f"{path}: non-numeric feature value: {exc}") from exc
    if data.shape[1] != len(header):
        raise DataFormatError(f"{path}: ragged rows")
    order = np.argsort(header)
    return data[:, order]


def load_means_csv(path) -> np.ndarray:
    """Current-state means: CSV with columns node,value."""
    with open(path, "r", encoding="utf-8", newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise DataFormatError(f"{path}: empty file")
    start = 1 if rows[0] and rows[0][0].strip().lower() == "node" else 0
    pairs = {}
    for row in rows[start:]:
        if not row:
            continue
        try:
            pairs[int(row[0])] = float(row[1])
        except (ValueError, IndexError) as exc:
            raise DataFormatError(f"{path}: bad row {row!r}: {exc}") from exc
    if sorted(pairs) != list(range(len(pairs))):
        raise DataFormatError(f"{path}: node column must cover 0..n-1")
    return np.array([pairs[i] for i in range(len(pairs))])
