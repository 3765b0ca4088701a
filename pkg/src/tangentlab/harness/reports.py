"""Report emission: CSV tables, JSON documents, provenance blocks.

CSV bodies are byte-deterministic for a fixed experiment configuration:
stable column order, floats at 17 significant digits, LF line endings.
Every CSV is paired with a ``<name>.provenance.json`` sidecar; JSON-format
reports embed the provenance block directly.
"""

from __future__ import annotations

import hashlib
import json
from pathlib import Path

import numpy as np

from .. import __version__
from ..errors import DomainError


def format_cell(value) -> str:
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (float, np.floating)):
        return f"{float(value):.17g}"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if value is None:
        return ""
    return str(value)


def _jsonable(value):
    if isinstance(value, (bool, np.bool_)):
        return bool(value)
    if isinstance(value, (int, np.integer)):
        return int(value)
    if isinstance(value, (float, np.floating)):
        v = float(value)
        return v if np.isfinite(v) else format_cell(v)
    if isinstance(value, np.ndarray):
        return [_jsonable(v) for v in value.tolist()]
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    if isinstance(value, dict):
        return {str(k): _jsonable(v) for k, v in value.items()}
    return value


def config_hash(config: dict) -> str:
    blob = json.dumps(_jsonable(config), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode("utf-8")).hexdigest()


def provenance_block(seed, sigma, config: dict, **extra) -> dict:
    block = {
        "tool": f"tangentlab {__version__}",
        "seed": seed,
        "sigma": sigma,
        "config_sha256": config_hash(config),
    }
    block.update(_jsonable(extra))
    return block


def write_csv(path, rows, columns) -> Path:
    path = Path(path)
    lines = [",".join(columns)]
    for row in rows:
        missing = [c for c in columns if c not in row]
        if missing:
            raise DomainError(f"row is missing columns {missing}")
        lines.append(",".join(format_cell(row[c]) for c in columns))
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return path


def write_json(path, payload: dict) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(
        json.dumps(_jsonable(payload), indent=2, sort_keys=True) + "\n",
        encoding="utf-8",
    )
    return path


def emit_report(rows, columns, path, fmt: str, provenance: dict) -> list[Path]:
    """Write one report table. Returns the written paths.

    ``fmt`` selects the primary artifact: 'csv' writes the table plus a
    provenance sidecar, 'json' writes a single document with the provenance
    embedded.
    """
    path = Path(path)
    if fmt == "csv":
        table = write_csv(path.with_suffix(".csv"), rows, columns)
        sidecar = write_json(
            path.with_suffix(".provenance.json"), {"provenance": provenance}
        )
        return [table, sidecar]
    if fmt == "json":
        doc = {
            "provenance": provenance,
            "columns": list(columns),
            "rows": [{c: _jsonable(r[c]) for c in columns} for r in rows],
        }
        return [write_json(path.with_suffix(".json"), doc)]
    raise DomainError(f"unknown report format {fmt!r}; expected csv or json")
