"""Labeled model collections and the JSON-lines dataset format.

File layout: line 1 is a deterministic header object that references the
run manifest; every following line is one model record

    {"n": ..., "edges": [[i, j], ...], "omega": [...], "b": [...],
     "label_marginals": [[p_minus, p_plus], ...] | null,
     "seed": [...], "labeler": "brute" | "ve" | "none"}

written with canonical key order and 17-significant-digit floats so that
read-then-write is byte identical.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .errors import DataFormatError, TooLarge
from .exact import ENUMERATION_BOUND, brute_force_marginals, ve_all_marginals
from .model import (
    Graph,
    GraphSpec,
    IsingModel,
    Marginals,
    generate_graph,
    model_to_dict,
    sample_model,
)
from .util import Seed, canonical_json

BRUTE_LABEL_BOUND = 16  # brute force below, variable elimination above


@dataclass
class LabeledDataset:
    """Models with optional exact-marginal labels plus provenance metadata."""

    models: list[IsingModel]
    labels: list[Marginals | None]
    meta: dict = field(default_factory=dict)
    seeds: list = field(default_factory=list)
    labeler: str = "none"

    def __post_init__(self):
        if len(self.models) != len(self.labels):
            raise ValueError("one label slot per model required")
        if not self.seeds:
            self.seeds = [None] * len(self.models)

    def __len__(self) -> int:
        return len(self.models)

    @property
    def pairs(self) -> list[tuple[IsingModel, Marginals]]:
        out = []
        for m, lab in zip(self.models, self.labels):
            if lab is None:
                raise ValueError("dataset contains unlabeled models")
            out.append((m, lab))
        return out


def label_model(m: IsingModel, labeler: str = "auto") -> tuple[Marginals, str]:
    """Exact marginals: brute force up to n=16, variable elimination above."""
    if labeler == "auto":
        labeler = "brute" if m.n <= BRUTE_LABEL_BOUND else "ve"
    if labeler == "brute":
        if m.n > ENUMERATION_BOUND:
            raise TooLarge(f"brute labeling refuses n={m.n} > {ENUMERATION_BOUND}")
        return brute_force_marginals(m), "brute"
    if labeler == "ve":
        return ve_all_marginals(m), "ve"
    raise ValueError(f"unknown labeler {labeler!r}")


def generate_dataset(order: int, aund_lo: float, aund_hi: float, count: int,
                     seed: int, labeler: str = "auto",
                     require_connected: bool = True) -> LabeledDataset:
    """Sample ``count`` (graph, parameters) instances and label them.

    Per-model randomness derives from ``[seed, index, 0]`` (graph) and
    ``[seed, index, 1]`` (parameters) so records are reproducible in
    isolation.
    """
    spec = GraphSpec(order, aund_lo, aund_hi, require_connected)
    models, labels, seeds = [], [], []
    used_labeler = "none"
    for i in range(count):
        g = generate_graph(spec, [seed, i, 0])
        m = sample_model(g, [seed, i, 1])
        if labeler == "none":
            lab = None
        else:
            lab, used_labeler = label_model(m, labeler)
        models.append(m)
        labels.append(lab)
        seeds.append([seed, i])
    meta = {
        "order": order,
        "aund_lo": aund_lo,
        "aund_hi": aund_hi,
        "count": count,
        "seed": seed,
        "require_connected": require_connected,
    }
    return LabeledDataset(models, labels, meta, seeds, used_labeler)


def record_to_dict(m: IsingModel, label: Marginals | None, seed, labeler: str) -> dict:
    doc = model_to_dict(m)
    doc["label_marginals"] = (
        [[float(a), float(b)] for a, b in label.table] if label is not None else None
    )
    doc["seed"] = seed
    doc["labeler"] = labeler if label is not None else "none"
    return doc


def write_dataset(path, ds: LabeledDataset, header: dict) -> None:
    """Write header line plus one canonical record per model."""
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(canonical_json(header))
        fh.write("\n")
        for m, lab, seed in zip(ds.models, ds.labels, ds.seeds):
            fh.write(canonical_json(record_to_dict(m, lab, seed, ds.labeler)))
            fh.write("\n")


def read_dataset(path) -> tuple[dict, LabeledDataset]:
    """Parse a JSON-lines dataset; returns (header, dataset)."""
    with open(path, "r", encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    if not lines:
        raise DataFormatError(f"{path}: empty dataset file (missing header)")
    try:
        header = json.loads(lines[0])
    except json.JSONDecodeError as exc:
        raise DataFormatError(f"{path}:1: bad header: {exc}") from exc
    models, labels, seeds = [], [], []
    labeler = "none"
    for lineno, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        try:
            doc = json.loads(line)
        except json.JSONDecodeError as exc:
            raise DataFormatError(f"{path}:{lineno}: bad record: {exc}") from exc
        try:
            g = Graph(int(doc["n"]), tuple((int(a), int(j)) for a, j in doc["edges"]))
            m = IsingModel(g, np.asarray(doc["omega"]), np.asarray(doc["b"]))
            raw = doc.get("label_marginals")
            lab = Marginals(np.asarray(raw, dtype=np.float64)) if raw is not None else None
            if lab is not None and lab.n != m.n:
                raise ValueError("label length mismatch")
        except (KeyError, TypeError, ValueError) as exc:
            raise DataFormatError(f"{path}:{lineno}: {exc}") from exc
        models.append(m)
        labels.append(lab)
        seeds.append(doc.get("seed"))
        if doc.get("labeler", "none") != "none":
            labeler = doc["labeler"]
    return header, LabeledDataset(models, labels, dict(header), seeds, labeler)
