"""CSV writing with a reproducibility header."""

from __future__ import annotations

import csv
import hashlib
import io
import json
from typing import Any, Iterable, Mapping, Sequence

import numpy as np


def _plain(obj: Any) -> Any:
    if isinstance(obj, Mapping):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_plain(v) for v in obj.tolist()]
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, complex):
        return [obj.real, obj.imag]
    return obj


def canonical_json(obj: Any) -> str:
    return json.dumps(_plain(obj), sort_keys=True, separators=(",", ":"))


def fingerprint(obj: Any) -> str:
    """sha256 of the canonical JSON serialization."""
    return hashlib.sha256(canonical_json(obj).encode()).hexdigest()


def fmt(v: Any) -> str:
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, (np.integer,)):
        return str(int(v))
    return str(v)


def csv_text(columns: Sequence[str], rows: Iterable[Sequence[Any]], meta: Mapping[str, Any] | None = None) -> str:
    """CSV with ``# key: value`` comment lines ahead of the column header."""
    buf = io.StringIO()
    for k, v in (meta or {}).items():
        buf.write(f"# {k}: {v}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for row in rows:
        w.writerow([fmt(v) for v in row])
    return buf.getvalue()


def read_csv(text: str) -> tuple[dict[str, str], list[dict[str, str]]]:
    """Inverse of :func:`csv_text`: (meta, rows as dicts)."""
    meta, body = {}, []
    for line in text.splitlines():
        if line.startswith("# "):
            k, _, v = line[2:].partition(": ")
            meta[k] = v
        else:
            body.append(line)
    rows = list(csv.DictReader(body))
    return meta, rows
