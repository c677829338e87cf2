"""Seeding and canonical serialization helpers.

All stochastic operations in the package take an explicit seed and build a
``numpy.random.Generator`` backed by PCG64 from it, so every experiment is
bit-reproducible across runs and platforms.
"""

from __future__ import annotations

import math

import numpy as np

Seed = int | list[int] | tuple[int, ...]


def rng_from_seed(seed: Seed) -> np.random.Generator:
    """Build the package-wide RNG (PCG64) from an integer or an int sequence.

    Sequences let callers derive independent per-item streams, e.g.
    ``rng_from_seed([seed, model_index])``.
    """
    if isinstance(seed, tuple):
        seed = list(seed)
    return np.random.Generator(np.random.PCG64(seed))


def fmt_float(x: float) -> str:
    """Format a float with 17 significant digits (exact float64 round trip)."""
    if math.isnan(x) or math.isinf(x):
        raise ValueError("non-finite float cannot be serialized")
    return format(x, ".17g")


def canonical_json(value) -> str:
    """Serialize to JSON with a fixed float format and stable key order.

    Dicts keep insertion order; floats use :func:`fmt_float` so writing the
    same values always produces the same bytes.
    """
    parts: list[str] = []
    _write_json(value, parts)
    return "".join(parts)


def _write_json(value, out: list[str]) -> None:
    if value is None:
        out.append("null")
    elif value is True:
        out.append("true")
    elif value is False:
        out.append("false")
    elif isinstance(value, str):
        out.append(_json_string(value))
    elif isinstance(value, (int, np.integer)):
        out.append(str(int(value)))
    elif isinstance(value, (float, np.floating)):
        out.append(fmt_float(float(value)))
    elif isinstance(value, dict):
        out.append("{")
        for i, (k, v) in enumerate(value.items()):
            if i:
                out.append(", ")
            if not isinstance(k, str):
                raise TypeError(f"JSON object keys must be strings, got {k!r}")
            out.append(_json_string(k))
            out.append(": ")
            _write_json(v, out)
        out.append("}")
    elif isinstance(value, (list, tuple)) or isinstance(value, np.ndarray):
        seq = value.tolist() if isinstance(value, np.ndarray) else value
        out.append("[")
        for i, v in enumerate(seq):
            if i:
                out.append(", ")
            _write_json(v, out)
        out.append("]")
    else:
        raise TypeError(f"cannot serialize {type(value).__name__}")


def _json_string(s: str) -> str:
    escaped = (
        s.replace("\\", "\\\\")
        .replace('"', '\\"')
        .replace("\n", "\\n")
        .replace("\r", "\\r")
        .replace("\t", "\\t")
    )
    return f'"{escaped}"'
