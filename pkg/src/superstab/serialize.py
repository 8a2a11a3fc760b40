"""Deterministic JSON/CSV emission.

JSON is the source-of-truth format: keys sorted, floats in shortest
round-trip form (Python's default repr), a single trailing newline.
Identical inputs therefore produce byte-identical files.  CSV is a lossy
tabular projection for the per-point tables.
"""

from __future__ import annotations

import csv
import io
import json
from pathlib import Path

from .instance import Instance, instance_from_obj


def dumps(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True, allow_nan=True) + "\n"


def write_json(path: str | Path, obj) -> None:
    Path(path).write_text(dumps(obj), encoding="utf-8")


def load_json(path: str | Path) -> dict:
    return json.loads(Path(path).read_text(encoding="utf-8"))


def instance_to_json(inst: Instance) -> str:
    return dumps(inst.to_obj())


def load_instance(path: str | Path) -> Instance:
    return instance_from_obj(load_json(path))


def csv_text(header, rows) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    writer.writerows(rows)
    return buf.getvalue()


def report_final_bounds_csv(report_obj: dict) -> str:
    rows = [
        [json.dumps(r["element"], sort_keys=True), r["bound"], r["gap"], r["holds"]]
        for r in report_obj.get("final_bounds", [])
    ]
    return csv_text(["element", "bound", "gap", "holds"], rows)
