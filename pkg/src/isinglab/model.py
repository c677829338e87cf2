"""Graph and Ising-model representation plus random instance generation.

The probability semantics used everywhere in this package:

    p(theta) = (1/Z) * exp(-energy(theta))
    energy(theta) = sum_{(i,j) in E} omega_ij * theta_i * theta_j
                  + sum_i b_i * theta_i,   theta_i in {-1, +1}

so negative ``omega_ij`` favours equal neighbour states and positive ``b_i``
favours ``theta_i = -1``.
"""

from __future__ import annotations

import heapq
import json
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DataFormatError, GenerationExhausted
from .util import Seed, canonical_json, rng_from_seed

GENERATION_ATTEMPTS = 10_000


@dataclass(frozen=True)
class Graph:
    """Undirected simple graph on nodes 0..n-1 with a canonical edge order.

    Edges are stored sorted lexicographically with i < j in each pair; this
    ordering is the one used by parallel parameter arrays and file formats.
    """

    n: int
    edges: tuple[tuple[int, int], ...]
    _adj: tuple[tuple[int, ...], ...] = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if self.n < 1:
            raise ValueError("graph needs at least one node")
        seen = set()
        canon = []
        for e in self.edges:
            i, j = int(e[0]), int(e[1])
            if i == j:
                raise ValueError(f"self-loop at node {i}")
            if not (0 <= i < self.n and 0 <= j < self.n):
                raise ValueError(f"edge ({i}, {j}) out of range for n={self.n}")
            key = (min(i, j), max(i, j))
            if key in seen:
                raise ValueError(f"duplicate edge {key}")
            seen.add(key)
            canon.append(key)
        canon.sort()
        object.__setattr__(self, "edges", tuple(canon))
        adj: list[list[int]] = [[] for _ in range(self.n)]
        for i, j in canon:
            adj[i].append(j)
            adj[j].append(i)
        object.__setattr__(self, "_adj", tuple(tuple(sorted(a)) for a in adj))

    def neighbors(self, i: int) -> tuple[int, ...]:
        return self._adj[i]

    def degree(self, i: int) -> int:
        return len(self._adj[i])

    def degrees(self) -> np.ndarray:
        return np.array([len(a) for a in self._adj], dtype=np.int64)

    @property
    def num_edges(self) -> int:
        return len(self.edges)


def average_unique_node_degree(g: Graph) -> float:
    """Mean over the set of distinct degree values occurring in the graph."""
    distinct = set(len(g._adj[i]) for i in range(g.n))
    return sum(distinct) / len(distinct)


def is_connected(g: Graph) -> bool:
    if g.n == 1:
        return True
    seen = [False] * g.n
    stack = [0]
    seen[0] = True
    count = 1
    while stack:
        u = stack.pop()
        for v in g.neighbors(u):
            if not seen[v]:
                seen[v] = True
                count += 1
                stack.append(v)
    return count == g.n


def random_tree(n: int, seed: Seed) -> Graph:
    """Uniform random labeled tree on n nodes (decoded Pruefer sequence)."""
    rng = rng_from_seed(seed)
    if n == 1:
        return Graph(1, ())
    if n == 2:
        return Graph(2, ((0, 1),))
    seq = rng.integers(0, n, size=n - 2)
    degree = np.ones(n, dtype=np.int64)
    for v in seq:
        degree[v] += 1
    leaves = [i for i in range(n) if degree[i] == 1]
    heapq.heapify(leaves)
    edges = []
    for v in seq:
        leaf = heapq.heappop(leaves)
        edges.append((leaf, int(v)))
        degree[v] -= 1
        if degree[v] == 1:
            heapq.heappush(leaves, int(v))
    u = heapq.heappop(leaves)
    w = heapq.heappop(leaves)
    edges.append((u, w))
    return Graph(n, tuple(edges))


@dataclass(frozen=True)
class GraphSpec:
    """Target properties for random graph generation.

    ``aund_lo``/``aund_hi`` bound the average unique node degree (closed
    interval).  A feasible spec needs ``order >= floor(aund_lo) + 1``.
    """

    order: int
    aund_lo: float
    aund_hi: float
    require_connected: bool = True

    def __post_init__(self):
        if self.order < 1:
            raise ValueError("order must be positive")
        if self.aund_lo > self.aund_hi:
            raise ValueError("empty AUND range")


def _aund_of_degrees(degrees: np.ndarray) -> float:
    vals = np.unique(degrees)
    return float(vals.mean())


def _stub_matching(degrees: np.ndarray, rng: np.random.Generator) -> set[tuple[int, int]] | None:
    """One configuration-model draw; None when it produces a loop or multi-edge."""
    stubs = np.repeat(np.arange(degrees.size), degrees)
    rng.shuffle(stubs)
    edges: set[tuple[int, int]] = set()
    for a, b in zip(stubs[0::2], stubs[1::2]):
        if a == b:
            return None
        key = (int(min(a, b)), int(max(a, b)))
        if key in edges:
            return None
        edges.add(key)
    return edges


def _havel_hakimi(degrees: np.ndarray) -> set[tuple[int, int]] | None:
    """Deterministic simple graph with the given degrees; None if not graphical."""
    remaining = [[int(d), i] for i, d in enumerate(degrees)]
    edges: set[tuple[int, int]] = set()
    while True:
        remaining.sort(key=lambda t: (-t[0], t[1]))
        d, u = remaining[0]
        if d == 0:
            return edges
        if d >= len(remaining):
            return None
        for k in range(1, d + 1):
            remaining[k][0] -= 1
            if remaining[k][0] < 0:
                return None
            v = remaining[k][1]
            edges.add((min(u, v), max(u, v)))
        remaining[0][0] = 0


def _randomize_by_swaps(edges: set[tuple[int, int]], rng: np.random.Generator,
                        rounds: int) -> set[tuple[int, int]]:
    """Degree-preserving double-edge swaps (randomizes wiring, not degrees)."""
    edge_list = list(edges)
    for _ in range(rounds):
        i, j = rng.integers(0, len(edge_list), size=2)
        if i == j:
            continue
        a, b = edge_list[i]
        c, d = edge_list[j]
        if rng.integers(0, 2):
            c, d = d, c
        if len({a, b, c, d}) < 4:
            continue
        e1 = (min(a, d), max(a, d))
        e2 = (min(c, b), max(c, b))
        if e1 in edges or e2 in edges:
            continue
        edges.remove(edge_list[i])
        edges.remove(edge_list[j])
        edges.add(e1)
        edges.add(e2)
        edge_list[i] = e1
        edge_list[j] = e2
    return edges


def generate_graph(spec: GraphSpec, seed: Seed) -> Graph:
    """Rejection-sample a graph meeting ``spec``.

    Each attempt draws a mean-degree target uniformly from the range,
    assigns every node a degree of floor or ceil of that target (the mix
    matching the mean), and wires the stubs uniformly at random
    (configuration model), rejecting self-loops, multi-edges, a
    disconnected result when connectivity is required, and an AUND outside
    the range.  Near-regular degrees keep every node on cycles, so cycle
    density grows with the order instead of collapsing to near-trees, and
    the minimal feasible order is floor(aund)+1 (the complete graph).
    Raises :class:`GenerationExhausted` after a bounded number of attempts.
    """
    n = spec.order
    if n < math.floor(spec.aund_lo) + 1:
        raise GenerationExhausted(
            f"order {n} cannot reach AUND >= {spec.aund_lo} (needs at least "
            f"{math.floor(spec.aund_lo) + 1} nodes)"
        )
    rng = rng_from_seed(seed)
    for _ in range(GENERATION_ATTEMPTS):
        target = rng.uniform(spec.aund_lo, spec.aund_hi)
        k_lo, k_hi = math.floor(target), math.ceil(target)
        if n == 1:
            degrees = np.zeros(1, dtype=np.int64)
        else:
            k_hi = min(k_hi, n - 1)
            k_lo = min(k_lo, k_hi)
            if k_hi > k_lo:
                n_hi = round(n * (target - k_lo) / (k_hi - k_lo))
            else:
                n_hi = 0
            degrees = np.array([k_hi] * n_hi + [k_lo] * (n - n_hi), dtype=np.int64)
            rng.shuffle(degrees)
            if degrees.sum() % 2:  # stub count must be even
                bump = int(rng.integers(0, n))
                degrees[bump] += 1 if degrees[bump] == k_lo else -1
        edges = _stub_matching(degrees, rng)
        if edges is None:
            # dense sequences defeat rejection sampling; build any valid
            # wiring and shuffle it with degree-preserving swaps instead
            edges = _havel_hakimi(degrees)
            if edges is None:
                continue
            edges = _randomize_by_swaps(edges, rng, rounds=10 * len(edges))
        g = Graph(n, tuple(edges))
        if spec.require_connected and not is_connected(g):
            continue
        if spec.aund_lo <= average_unique_node_degree(g) <= spec.aund_hi:
            return g
    raise GenerationExhausted(
        f"no graph with order {n} and AUND in [{spec.aund_lo}, {spec.aund_hi}] "
        f"found in {GENERATION_ATTEMPTS} attempts"
    )


@dataclass(frozen=True, eq=False)
class IsingModel:
    """Pairwise binary Markov network: a graph plus edge/node parameters.

    ``omega[k]`` belongs to ``graph.edges[k]`` (canonical order); ``b[i]``
    belongs to node ``i``.  Arrays are frozen after construction.
    """

    graph: Graph
    omega: np.ndarray
    b: np.ndarray
    edge_i: np.ndarray = field(init=False, repr=False)
    edge_j: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        omega = np.ascontiguousarray(np.asarray(self.omega, dtype=np.float64))
        b = np.ascontiguousarray(np.asarray(self.b, dtype=np.float64))
        if omega.shape != (self.graph.num_edges,):
            raise ValueError("omega must have one entry per edge")
        if b.shape != (self.graph.n,):
            raise ValueError("b must have one entry per node")
        if not (np.all(np.isfinite(omega)) and np.all(np.isfinite(b))):
            raise ValueError("parameters must be finite")
        omega.flags.writeable = False
        b.flags.writeable = False
        object.__setattr__(self, "omega", omega)
        object.__setattr__(self, "b", b)
        if self.graph.num_edges:
            ei, ej = zip(*self.graph.edges)
        else:
            ei, ej = (), ()
        object.__setattr__(self, "edge_i", np.array(ei, dtype=np.int64))
        object.__setattr__(self, "edge_j", np.array(ej, dtype=np.int64))

    @property
    def n(self) -> int:
        return self.graph.n


def sample_model(g: Graph, seed: Seed, omega_std: float = 1.0, b_std: float = 0.25) -> IsingModel:
    """Draw omega_ij ~ N(0, omega_std^2) and b_i ~ N(0, b_std^2) i.i.d.

    Draw order is pinned (all edge weights first, then node fields) so a
    seed fully determines the model.
    """
    rng = rng_from_seed(seed)
    omega = rng.normal(0.0, omega_std, size=g.num_edges)
    b = rng.normal(0.0, b_std, size=g.n)
    return IsingModel(g, omega, b)


def as_assignment(values, n: int) -> np.ndarray:
    a = np.asarray(values, dtype=np.float64)
    if a.shape != (n,):
        raise ValueError(f"assignment must have length {n}")
    if not np.all(np.abs(a) == 1.0):
        raise ValueError("assignment entries must be -1 or +1")
    return a


def energy(m: IsingModel, assignment) -> float:
    """sum omega_ij * theta_i * theta_j + sum b_i * theta_i."""
    a = as_assignment(assignment, m.n)
    e = float(np.dot(m.b, a))
    if m.graph.num_edges:
        e += float(np.dot(m.omega, a[m.edge_i] * a[m.edge_j]))
    return e


def zero_edges(m: IsingModel) -> IsingModel:
    """Copy of the model with every edge potential parameter set to zero."""
    return IsingModel(m.graph, np.zeros(m.graph.num_edges), m.b.copy())


@dataclass(frozen=True, eq=False)
class Marginals:
    """Per-node two-state distributions; column 0 is p(theta=-1), column 1 p(theta=+1)."""

    table: np.ndarray

    def __post_init__(self):
        t = np.ascontiguousarray(np.asarray(self.table, dtype=np.float64))
        if t.ndim != 2 or t.shape[1] != 2:
            raise ValueError("marginals must be an (n, 2) table")
        if np.any(t < -1e-12) or np.any(t > 1 + 1e-12):
            raise ValueError("marginal entries must lie in [0, 1]")
        if np.max(np.abs(t.sum(axis=1) - 1.0)) > 1e-9:
            raise ValueError("marginal rows must sum to 1 within 1e-9")
        t.flags.writeable = False
        object.__setattr__(self, "table", t)

    @classmethod
    def from_p_plus(cls, p_plus) -> "Marginals":
        p = np.asarray(p_plus, dtype=np.float64)
        return cls(np.column_stack([1.0 - p, p]))

    @property
    def n(self) -> int:
        return self.table.shape[0]

    @property
    def p_minus(self) -> np.ndarray:
        return self.table[:, 0]

    @property
    def p_plus(self) -> np.ndarray:
        return self.table[:, 1]


# -- model file format ------------------------------------------------------
#
# One JSON document per model: {"n": int, "edges": [[i, j], ...] with i < j in
# lexicographic order, "omega": [...parallel to edges...], "b": [...length n...]}.
# omega/b may be omitted for topology-only files.


def model_to_dict(m: IsingModel) -> dict:
    return {
        "n": m.graph.n,
        "edges": [[i, j] for i, j in m.graph.edges],
        "omega": [float(w) for w in m.omega],
        "b": [float(x) for x in m.b],
    }


def _graph_from_dict(doc: dict) -> Graph:
    try:
        n = int(doc["n"])
        edges = tuple((int(e[0]), int(e[1])) for e in doc["edges"])
        return Graph(n, edges)
    except (KeyError, TypeError, ValueError, IndexError) as exc:
        raise DataFormatError(f"bad graph document: {exc}") from exc


def model_from_dict(doc: dict) -> IsingModel:
    g = _graph_from_dict(doc)
    try:
        omega = np.asarray(doc["omega"], dtype=np.float64)
        b = np.asarray(doc["b"], dtype=np.float64)
        return IsingModel(g, omega, b)
    except (KeyError, TypeError, ValueError) as exc:
        raise DataFormatError(f"bad model document: {exc}") from exc


def save_model(m: IsingModel, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(canonical_json(model_to_dict(m)))
        fh.write("\n")


def load_model(path) -> IsingModel:
    with open(path, "r", encoding="utf-8") as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise DataFormatError(f"{path}: not valid JSON: {exc}") from exc
    return model_from_dict(doc)


def load_topology(path) -> Graph:
    """Read only the graph part of a model file (omega/b optional)."""
    with open(path, "r", encoding="utf-8") as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise DataFormatError(f"{path}: not valid JSON: {exc}") from exc
    return _graph_from_dict(doc)
