"""Ground-truth inference: brute-force enumeration and variable elimination.

Factors are kept in log-space throughout (products become sums and
marginalization uses log-sum-exp), which keeps dense models with large
couplings inside float64 range.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import logsumexp

from .errors import TooLarge
from .model import Graph, IsingModel, Marginals

ENUMERATION_BOUND = 25
_CHUNK_BITS = 17  # 2^17 assignments per enumeration chunk

_SPIN = np.array([-1.0, 1.0])  # state index 0 -> theta=-1, 1 -> theta=+1


def _chunk_energies(m: IsingModel, idx: np.ndarray) -> np.ndarray:
    """Energies of the assignments encoded by integers ``idx`` (bit i = node i)."""
    bits = (idx[:, None] >> np.arange(m.n)) & 1
    s = bits.astype(np.float64) * 2.0 - 1.0
    e = s @ m.b
    if m.graph.num_edges:
        e += (s[:, m.edge_i] * s[:, m.edge_j]) @ m.omega
    return e


def _enumerate_log_weights(m: IsingModel):
    """Yield (bits, log_weight) chunks over all 2^n assignments."""
    n = m.n
    total = 1 << n
    step = min(total, 1 << _CHUNK_BITS)
    for start in range(0, total, step):
        idx = np.arange(start, min(start + step, total), dtype=np.int64)
        bits = (idx[:, None] >> np.arange(n)) & 1
        yield bits, -_chunk_energies(m, idx)


def brute_force_marginals(m: IsingModel) -> Marginals:
    """Exact marginals by direct summation over all 2^n assignments."""
    n = m.n
    if n > ENUMERATION_BOUND:
        raise TooLarge(f"n={n} exceeds enumeration bound {ENUMERATION_BOUND}")
    plus_parts, minus_parts, all_parts = [], [], []
    for bits, logw in _enumerate_log_weights(m):
        col = logw[:, None]
        plus_parts.append(logsumexp(np.where(bits == 1, col, -np.inf), axis=0))
        minus_parts.append(logsumexp(np.where(bits == 0, col, -np.inf), axis=0))
        all_parts.append(logsumexp(logw))
    log_plus = logsumexp(np.stack(plus_parts), axis=0)
    log_minus = logsumexp(np.stack(minus_parts), axis=0)
    log_z = logsumexp(np.array(all_parts))
    return Marginals(np.column_stack([np.exp(log_minus - log_z), np.exp(log_plus - log_z)]))


def log_partition(m: IsingModel) -> float:
    """log sum_theta exp(-energy(theta)), via streaming log-sum-exp."""
    if m.n > ENUMERATION_BOUND:
        raise TooLarge(f"n={m.n} exceeds enumeration bound {ENUMERATION_BOUND}")
    parts = [logsumexp(logw) for _, logw in _enumerate_log_weights(m)]
    return float(logsumexp(np.array(parts)))


@dataclass(frozen=True)
class Factor:
    """Log-domain factor over binary variables.

    ``scope`` is sorted ascending; ``logtable`` has shape (2,)*len(scope).
    The flattened table enumerates joint states in binary counting order
    with -1 -> 0, +1 -> 1 and the last scope variable fastest (C order).
    """

    scope: tuple[int, ...]
    logtable: np.ndarray

    def __post_init__(self):
        if tuple(sorted(self.scope)) != self.scope:
            raise ValueError("factor scope must be sorted ascending")
        if self.logtable.shape != (2,) * len(self.scope):
            raise ValueError("logtable shape must be (2,)*len(scope)")


def factor_product(a: Factor, b: Factor) -> Factor:
    scope = tuple(sorted(set(a.scope) | set(b.scope)))
    ta = _expand(a, scope)
    tb = _expand(b, scope)
    return Factor(scope, ta + tb)


def _expand(f: Factor, scope: tuple[int, ...]) -> np.ndarray:
    shape = [2 if v in f.scope else 1 for v in scope]
    return f.logtable.reshape(shape)


def sum_out(f: Factor, var: int) -> Factor:
    axis = f.scope.index(var)
    table = logsumexp(f.logtable, axis=axis)
    scope = tuple(v for v in f.scope if v != var)
    return Factor(scope, table)


def model_factors(m: IsingModel) -> list[Factor]:
    """One node factor exp(-b_i theta_i) and one edge factor exp(-w theta_i theta_j) each."""
    factors = [
        Factor((i,), -m.b[i] * _SPIN)
        for i in range(m.n)
    ]
    for k, (i, j) in enumerate(m.graph.edges):
        table = -m.omega[k] * np.outer(_SPIN, _SPIN)
        factors.append(Factor((i, j), table))
    return factors


def min_degree_order(g: Graph, query: int | None = None) -> list[int]:
    """Greedy minimum-degree elimination order over the fill-in graph.

    Ties break toward the lowest node index; ``query`` (if given) is kept
    out of the ordering.
    """
    adj = {i: set(g.neighbors(i)) for i in range(g.n)}
    remaining = set(range(g.n))
    if query is not None:
        remaining.discard(query)
    order = []
    while remaining:
        u = min(remaining, key=lambda v: (len(adj[v] & remaining), v))
        nbrs = [v for v in adj[u] if v in remaining or v == query]
        for x in nbrs:
            for y in nbrs:
                if x < y:
                    adj[x].add(y)
                    adj[y].add(x)
        remaining.discard(u)
        order.append(u)
    return order


def _eliminate(factors: list[Factor], order: list[int]) -> list[Factor]:
    for z in order:
        related = [f for f in factors if z in f.scope]
        if not related:
            continue
        prod = related[0]
        for f in related[1:]:
            prod = factor_product(prod, f)
        tau = sum_out(prod, z)
        factors = [f for f in factors if z not in f.scope]
        factors.append(tau)  # scalar factors keep their weight
    return factors


def variable_elimination_marginals(m: IsingModel, query: int) -> np.ndarray:
    """Exact (p_minus, p_plus) for one node via factor product and sum-out."""
    if not 0 <= query < m.n:
        raise ValueError("query out of range")
    factors = model_factors(m)
    order = min_degree_order(m.graph, query=query)
    factors = _eliminate(factors, order)
    log_unnorm = np.zeros(2)
    for f in factors:
        if f.scope == (query,):
            log_unnorm = log_unnorm + f.logtable
        elif f.scope == ():
            log_unnorm = log_unnorm + f.logtable  # broadcast scalar
        else:  # pragma: no cover - elimination always reduces to the query
            raise AssertionError("unexpected residual scope")
    log_unnorm -= logsumexp(log_unnorm)
    return np.exp(log_unnorm)


def ve_all_marginals(m: IsingModel) -> Marginals:
    """Per-query variable elimination for every node."""
    rows = [variable_elimination_marginals(m, q) for q in range(m.n)]
    return Marginals(np.vstack(rows))


def elimination_width(g: Graph, query: int | None = None) -> int:
    """Largest factor scope (variable count) produced by the min-degree order."""
    adj = {i: set(g.neighbors(i)) for i in range(g.n)}
    remaining = set(range(g.n))
    if query is not None:
        remaining.discard(query)
    width = 1
    while remaining:
        u = min(remaining, key=lambda v: (len(adj[v] & remaining), v))
        nbrs = [v for v in adj[u] if v in remaining or v == query]
        width = max(width, len(nbrs) + 1)
        for x in nbrs:
            for y in nbrs:
                if x < y:
                    adj[x].add(y)
                    adj[y].add(x)
        remaining.discard(u)
    return width
