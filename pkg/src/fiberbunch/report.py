"""Deterministic JSON and CSV reports."""

from __future__ import annotations

import csv
import datetime as _dt
import hashlib
import json
import math
from pathlib import Path
from typing import Any

import numpy as np

SCHEMA_VERSION = "1.0"
SIG_DIGITS = 15


def round_sig(value: float) -> float | str:
    if not math.isfinite(value):
        return "nan" if math.isnan(value) else ("inf" if value > 0 else "-inf")
    return float(f"{value:.{SIG_DIGITS}g}")


def normalize(obj: Any) -> Any:
    """Plain JSON types with every float cut to 15 significant digits."""
    if isinstance(obj, dict):
        return {str(k): normalize(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [normalize(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return normalize(obj.tolist())
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        return round_sig(float(obj))
    return obj


def digest(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()


def _cell(v: Any) -> str:
    if isinstance(v, (float, np.floating)):
        r = round_sig(float(v))
        return r if isinstance(r, str) else f"{float(v):.{SIG_DIGITS}g}"
    return str(v)


def emit_report(out_dir: Path, task: str, scenario_digest: str, seed: int, exit_code: int,
                checks: list[dict], results: dict | None = None,
                tables: dict[str, tuple[list[str], list[list]]] | None = None,
                error: str | None = None) -> dict:
    """Write ``report.json``, one CSV per table and ``timestamp.json``.

    The timestamp lives in its own file so that ``report.json`` is
    byte-identical across runs with the same scenario and seed.
    """
    out_dir.mkdir(parents=True, exist_ok=True)
    report = {
        "schema_version": SCHEMA_VERSION,
        "task": task,
        "scenario_digest": scenario_digest,
        "seed": seed,
        "exit_code": exit_code,
        "status": {0: "pass", 1: "violation", 2: "undetermined", 3: "input_error"}[exit_code],
        "checks": checks,
        "results": results or {},
    }
    if error is not None:
        report["error"] = error
    report = normalize(report)
    text = json.dumps(report, indent=2, sort_keys=True, ensure_ascii=False) + "\n"
    (out_dir / "report.json").write_text(text, encoding="utf-8")
    for name, (header, rows) in (tables or {}).items():
        with open(out_dir / f"{name}.csv", "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(header)
            for row in rows:
                w.writerow([_cell(v) for v in row])
    stamp = {"timestamp": _dt.datetime.now(_dt.timezone.utc).isoformat()}
    (out_dir / "timestamp.json").write_text(json.dumps(stamp) + "\n", encoding="utf-8")
    return report
