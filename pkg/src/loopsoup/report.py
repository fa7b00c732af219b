"""Report files: CSV tables and JSON summaries with fixed field order and float formats.

Exact quantities (conversions, coordinates) are written with 17 significant
digits, statistics with 6. Every file names the sha256 of the manifest that
produced it: CSV files on a leading ``#`` line, JSON files in a
``manifest_sha256`` field.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from loopsoup.fractal import c_of_kappa

EXACT = 17
STAT = 6


@dataclass
class Table:
    fields: list[str]
    rows: list = field(default_factory=list)
    digits: int = STAT


@dataclass
class Results:
    tables: dict[str, Table] = field(default_factory=dict)
    summary: dict = field(default_factory=dict)
    extra: dict[str, str] = field(default_factory=dict)  # file name -> text (svg, dumps)
    digits: int = STAT


def sha256_bytes(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()


def fmt_float(x, digits: int) -> str:
    x = float(x)
    if math.isnan(x):
        return "nan"
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return format(x, f".{digits}g")


def _cell(v, digits):
    if isinstance(v, (bool, np.bool_)):
        return str(int(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return fmt_float(v, digits)
    if v is None:
        return ""
    return str(v)


def csv_text(table: Table, manifest_hash: str) -> str:
    buf = io.StringIO()
    buf.write(f"# manifest_sha256={manifest_hash}\r\n")
    w = csv.writer(buf, lineterminator="\r\n")
    w.writerow(table.fields)
    for row in table.rows:
        vals = [row[k] for k in table.fields] if isinstance(row, dict) else list(row)
        w.writerow([_cell(v, table.digits) for v in vals])
    return buf.getvalue()


def read_csv(path) -> tuple[list[str], list[list[str]]]:
    with open(path, newline="") as f:
        lines = [ln for ln in f if not ln.startswith("#")]
    rows = list(csv.reader(lines))
    return rows[0], rows[1:]


def _jsonable(v, digits):
    if isinstance(v, dict):
        return {str(k): _jsonable(x, digits) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_jsonable(x, digits) for x in v]
    if isinstance(v, np.ndarray):
        return [_jsonable(x, digits) for x in v.tolist()]
    if isinstance(v, (bool, np.bool_)):
        return bool(v)
    if isinstance(v, (int, np.integer)):
        return int(v)
    if isinstance(v, (float, np.floating)):
        x = float(v)
        if not math.isfinite(x):
            return fmt_float(x, digits)
        return float(fmt_float(x, digits))
    if hasattr(v, "to_dict"):
        return _jsonable(v.to_dict(), digits)
    return v


def json_text(summary: dict, manifest_hash: str, digits: int = STAT) -> str:
    body = {"manifest_sha256": manifest_hash, **_jsonable(summary, digits)}
    return json.dumps(body, indent=2, sort_keys=False) + "\n"


def read_json(path) -> dict:
    with open(path) as f:
        return json.load(f)


def emit_report(results: Results, out_dir, manifest_hash: str) -> list[Path]:
    """Write every table as ``<name>.csv``, the summary as ``summary.json`` and the extras verbatim."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []
    for name in sorted(results.tables):
        p = out / f"{name}.csv"
        with open(p, "w", newline="") as f:
            f.write(csv_text(results.tables[name], manifest_hash))
        written.append(p)
    p = out / "summary.json"
    with open(p, "w", newline="\n") as f:
        f.write(json_text(results.summary, manifest_hash, results.digits))
    written.append(p)
    for name in sorted(results.extra):
        p = out / name
        data = results.extra[name]
        if isinstance(data, bytes):
            p.write_bytes(data)
        else:
            with open(p, "w", newline="\n") as f:
                f.write(data)
        written.append(p)
    return written


def conversion_table(kappas=(2.7, 3.0, 3.5, 4.0)) -> Table:
    from loopsoup.fractal import alpha_of_kappa, dimension_of_kappa

    rows = [
        {"kappa": k, "c": c_of_kappa(k), "alpha": alpha_of_kappa(k), "dimension": dimension_of_kappa(k)}
        for k in kappas
    ]
    return Table(["kappa", "c", "alpha", "dimension"], rows, EXACT)
