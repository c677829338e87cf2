"""Binary-state inference on pairwise Markov networks.

Exact inference (enumeration, variable elimination), classical approximate
baselines (loopy BP, Gibbs sampling), a trainable message-passing GNN with
size-generalization benchmarking, and a data-driven potential-learning
pipeline, all behind a reproducible seeded API and a CLI harness.
"""

__version__ = "0.1.0"

from .model import (  # noqa: F401
    Graph,
    GraphSpec,
    IsingModel,
    Marginals,
    average_unique_node_degree,
    energy,
    generate_graph,
    sample_model,
    zero_edges,
)
