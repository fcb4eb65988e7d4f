"""CSV/JSON persistence for experiment outputs.

Floats are written with 17 significant digits so every value round-trips
exactly; non-finite floats become the strings ``inf``, ``-inf`` and ``nan``.
"""
from __future__ import annotations

import csv
import io
import json
import math
from pathlib import Path

import numpy as np


class OutputError(OSError):
    pass


def format_float(x: float) -> str:
    if math.isnan(x):
        return "nan"
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return format(x, ".17g")


def _cell(value) -> str:
    if isinstance(value, (bool, np.bool_)):
        return str(int(value))
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return format_float(float(value))
    return str(value)


def csv_text(columns, rows) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\r\n")
    writer.writerow(columns)
    for row in rows:
        writer.writerow([_cell(v) for v in row])
    return buf.getvalue()


def _json(value, indent: int = 0) -> str:
    pad = "  " * (indent + 1)
    end = "  " * indent
    if value is None:
        return "null"
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        x = float(value)
        return format_float(x) if math.isfinite(x) else f'"{format_float(x)}"'
    if isinstance(value, str):
        return _json_string(value)
    if isinstance(value, dict):
        if not value:
            return "{}"
        items = [f"{pad}{_json_string(str(k))}: {_json(v, indent + 1)}" for k, v in value.items()]
        return "{\n" + ",\n".join(items) + "\n" + end + "}"
    if isinstance(value, (list, tuple, np.ndarray)):
        if len(value) == 0:
            return "[]"
        return "[" + ", ".join(_json(v, indent + 1) for v in value) + "]"
    if hasattr(value, "value"):  # enums
        return _json(value.value, indent)
    raise TypeError(f"cannot serialise {type(value).__name__}")


def _json_string(text: str) -> str:
    return json.dumps(text)


def json_text(obj) -> str:
    """JSON with 17-significant-digit floats and quoted non-finite values."""
    return _json(obj) + "\n"


def _write(path: Path, text: str):
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", newline="") as fh:
            fh.write(text)
    except OSError as exc:
        raise OutputError(f"cannot write {path}: {exc}") from exc


def summary_dict(output) -> dict:
    return {
        "experiment": output.name,
        "seed": output.spec.seed,
        "trials": len(output.records),
        "spec": output.spec.to_dict(),
        "metadata": output.metadata,
        "aggregates": output.aggregates,
    }


def emit_outputs(output, directory) -> list[Path]:
    """Write records.csv, summary.json and plotdata/*.csv; return the paths written."""
    directory = Path(directory)
    written = []
    path = directory / "records.csv"
    _write(path, csv_text(output.columns, ([r[c] for c in output.columns] for r in output.records)))
    written.append(path)
    path = directory / "summary.json"
    _write(path, json_text(summary_dict(output)))
    written.append(path)
    for name, (columns, rows) in sorted(output.plotdata.items()):
        path = directory / "plotdata" / f"{name}.csv"
        _write(path, csv_text(columns, rows))
        written.append(path)
    return written


def read_records(path) -> list[dict]:
    """Load records.csv back as dicts of strings."""
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))
