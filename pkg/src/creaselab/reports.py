"""Deterministic JSON/CSV report writing.

The main report is byte-identical for identical configuration and seed:
keys are sorted, floats use the shortest round-trip representation, and
wall-clock timing goes to a separate sidecar file.
"""

from __future__ import annotations

import json
import os
import tempfile

import numpy as np

from . import __version__

SCHEMA_VERSION = 1


def _plain(obj):
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _plain(obj.tolist())
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    if isinstance(obj, complex):
        return {"re": obj.real, "im": obj.imag}
    return obj


def render_report(command: str, config_echo: dict, results: dict, passed: bool, flags: dict) -> str:
    doc = {
        "schema_version": SCHEMA_VERSION,
        "library_version": __version__,
        "command": command,
        "config": _plain(config_echo),
        "results": _plain(results),
        "flags": _plain(flags),
        "passed": bool(passed),
    }
    return json.dumps(doc, sort_keys=True, indent=1, separators=(",", ": ")) + "\n"


def write_atomic(path: str, text: str) -> None:
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=directory, suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as fh:
            fh.write(text)
        os.replace(tmp, path)
    finally:
        if os.path.exists(tmp):
            os.unlink(tmp)


def write_csv(path: str, header: list[str], rows) -> None:
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(repr(float(v)) for v in row))
    write_atomic(path, "\n".join(lines) + "\n")
