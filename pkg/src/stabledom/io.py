"""Deterministic JSON/CSV helpers (no timestamps, full float precision)."""

from __future__ import annotations

import csv
import hashlib
import json
from pathlib import Path

from .reports import _clean


def fmt(x) -> str:
    if isinstance(x, (int, str)) and not isinstance(x, bool):
        return str(x)
    return format(float(x), ".17g")


def write_csv(path, header: list[str], rows) -> Path:
    path = Path(path)
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh, lineterminator="\n")
        wr.writerow(header)
        for row in rows:
            wr.writerow([fmt(v) for v in row])
    return path


def read_csv(path) -> tuple[list[str], list[list[str]]]:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    return rows[0], rows[1:]


def dumps(obj) -> str:
    return json.dumps(_clean(obj), sort_keys=True, indent=2) + "\n"


def write_json(path, obj) -> Path:
    path = Path(path)
    path.write_text(dumps(obj))
    return path


def read_json(path):
    with open(path) as fh:
        return json.load(fh)


def config_hash(obj, length: int = 12) -> str:
    """Short content hash of a JSON-serializable object (key order independent)."""
    blob = json.dumps(_clean(obj), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode()).hexdigest()[:length]
