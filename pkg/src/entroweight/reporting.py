"""Report files: schema-versioned JSON, flat CSV, plot series.  All writes are atomic."""

from __future__ import annotations

import csv
import io
import json
import math
import os
import tempfile
from pathlib import Path
from typing import Iterable

SCHEMA_VERSION = 1
CSV_HEADER = ["harness", "config_id", "J", "lhs", "rhs", "ratio", "pass"]


def atomic_write(path, text: str) -> Path:
    """Write ``text`` to a temp file next to ``path`` and rename it into place."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(prefix=f".{path.name}.", dir=path.parent)
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    return path


def _clean(obj):
    """JSON-safe copy: non-finite floats become strings, tuples become lists."""
    if isinstance(obj, float):
        if math.isfinite(obj):
            return obj
        return "nan" if math.isnan(obj) else ("inf" if obj > 0 else "-inf")
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if hasattr(obj, "item") and callable(obj.item):
        return _clean(obj.item())
    return obj


def dumps(obj) -> str:
    return json.dumps(_clean(obj), indent=2, sort_keys=True) + "\n"


def write_json(path, obj) -> Path:
    return atomic_write(path, dumps(obj))


def _fmt(x) -> str:
    x = float(x)
    return repr(x) if math.isfinite(x) else str(x)


def reports_csv(reports: Iterable) -> str:
    buf = io.StringIO()
    wr = csv.writer(buf, lineterminator="\n")
    wr.writerow(CSV_HEADER)
    for r in reports:
        wr.writerow([r.harness, r.config_id, r.J, _fmt(r.lhs), _fmt(r.rhs), _fmt(r.ratio),
                     "true" if r.passed else "false"])
    return buf.getvalue()


def plot_csv(reports: Iterable) -> str:
    buf = io.StringIO()
    wr = csv.writer(buf, lineterminator="\n")
    wr.writerow(["harness", "config_id", "J", "ratio"])
    for r in reports:
        for J, ratio in (r.series or [(r.J, r.ratio)]):
            wr.writerow([r.harness, r.config_id, int(J), _fmt(ratio)])
    return buf.getvalue()


def emit_reports(reports, out_dir, stem: str = "report", json_out: bool = True,
                 csv_out: bool = True) -> list[Path]:
    """Write the JSON bundle, the flat CSV and the plot series under ``out_dir``."""
    reports = list(reports)
    out = Path(out_dir)
    written = []
    if json_out:
        bundle = {
            "schema_version": SCHEMA_VERSION,
            "count": len(reports),
            "all_pass": all(r.passed for r in reports),
            "reports": [r.to_dict() for r in reports],
        }
        written.append(write_json(out / f"{stem}.json", bundle))
    if csv_out:
        written.append(atomic_write(out / f"{stem}.csv", reports_csv(reports)))
        written.append(atomic_write(out / f"{stem}_series.csv", plot_csv(reports)))
    return written
