"""CSV/JSON emission driven by the per-kind column schemas in ``schemas/``."""

from __future__ import annotations

import csv
import json
import math
from functools import lru_cache
from importlib import resources
from pathlib import Path
from typing import Any, Iterable

import numpy as np
import yaml

from ..errors import ConfigError


@lru_cache(maxsize=None)
def load_schema(kind: str) -> dict:
    """``{table name: {"file": ..., "columns": [...]}}`` for one experiment kind."""
    path = resources.files("cvar_pomdp.harness") / "schemas" / f"{kind}.yaml"
    if not path.is_file():
        raise ConfigError(f"no output schema for experiment kind {kind!r}")
    doc = yaml.safe_load(path.read_text())
    return {name: {"file": t["file"], "columns": list(t["columns"])} for name, t in doc["tables"].items()}


def _plain(value: Any) -> Any:
    if isinstance(value, (np.floating, np.integer, np.bool_)):
        return value.item()
    if isinstance(value, np.ndarray):
        return value.tolist()
    if hasattr(value, "value") and isinstance(getattr(value, "value"), str):
        return value.value
    if isinstance(value, (list, tuple)):
        return [_plain(v) for v in value]
    if isinstance(value, dict):
        return {str(k): _plain(v) for k, v in value.items()}
    return value


def _cell(value: Any) -> str:
    value = _plain(value)
    if value is None:
        return ""
    if isinstance(value, float):
        return "nan" if math.isnan(value) else repr(value)
    if isinstance(value, list):
        return json.dumps(value)
    return str(value)


def write_csv(path: Path, rows: Iterable[dict], columns: list[str]) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        for row in rows:
            w.writerow([_cell(row.get(c)) for c in columns])
    return path


def write_json(path: Path, rows: Iterable[dict]) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    payload = [_plain(r) for r in rows]
    path.write_text(json.dumps(payload, indent=1, sort_keys=True, allow_nan=True) + "\n")
    return path


def emit(kind: str, out_dir, tables: dict[str, list[dict]]) -> list[Path]:
    """Write each declared table as CSV (schema columns only) and JSON (full rows)."""
    schema = load_schema(kind)
    out = Path(out_dir)
    written = []
    missing = set(tables) - set(schema)
    if missing:
        raise ConfigError(f"tables {sorted(missing)} not declared in the {kind} schema")
    for name, spec in schema.items():
        rows = tables.get(name, [])
        written.append(write_csv(out / spec["file"], rows, spec["columns"]))
        written.append(write_json(out / (Path(spec["file"]).stem + ".json"), rows))
    return written
