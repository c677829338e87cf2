"""Run manifests: every CLI command records its resolved configuration.

The full manifest (including wall-clock timestamps) lives in a sidecar
``<output>.manifest.json``; output files embed only the deterministic
subset (command, version, config, seeds) so that re-running a manifest
reproduces output bytes exactly.
"""

from __future__ import annotations

import datetime
import os

from . import __version__
from .util import canonical_json


def manifest_path(output_path: str) -> str:
    return f"{output_path}.manifest.json"


def deterministic_header(command: str, config: dict) -> dict:
    """The part of a manifest that is embedded into output files."""
    return {
        "type": "run_header",
        "command": command,
        "tool_version": __version__,
        "config": config,
    }


def write_manifest(output_path: str, command: str, config: dict,
                   inputs: list[str], outputs: list[str],
                   started: datetime.datetime, finished: datetime.datetime) -> str:
    doc = {
        "type": "run_manifest",
        "command": command,
        "tool_version": __version__,
        "config": config,
        "inputs": list(inputs),
        "outputs": list(outputs),
        "started_at": started.isoformat(),
        "finished_at": finished.isoformat(),
    }
    path = manifest_path(output_path)
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(canonical_json(doc))
        fh.write("\n")
    return os.path.basename(path)
