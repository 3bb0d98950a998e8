"""Report container and CSV/JSON emission.

JSON output uses insertion key order and writes every float with 17
significant digits, so reloading reproduces the scalars bit for bit.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

__all__ = ["Verdict", "Table", "Report", "verdict", "to_json", "to_csv", "emit"]


@dataclass
class Verdict:
    name: str
    passed: bool
    value: float
    threshold: float
    relation: str  # "<=" or ">=": how value must compare to threshold
    margin: float  # signed slack, positive when the check passes with room
    note: str = ""


def verdict(name: str, value: float, relation: str, threshold: float, note: str = "") -> Verdict:
    value = float(value)
    threshold = float(threshold)
    if relation == "<=":
        margin = threshold - value
    elif relation == ">=":
        margin = value - threshold
    elif relation == ">":
        margin = value - threshold
    elif relation == "<":
        margin = threshold - value
    else:
        raise ValueError(f"unknown relation {relation!r}")
    strict = relation in ("<", ">")
    passed = (margin > 0 if strict else margin >= 0) and not math.isnan(value)
    return Verdict(name, bool(passed), value, threshold, relation, margin, note)


@dataclass
class Table:
    columns: list
    rows: list = field(default_factory=list)

    def add(self, **row):
        missing = [c for c in self.columns if c not in row]
        if missing:
            raise KeyError(f"row lacks columns {missing}")
        self.rows.append([row[c] for c in self.columns])


@dataclass
class Report:
    title: str
    scenario: dict = field(default_factory=dict)
    scalars: dict = field(default_factory=dict)
    tables: dict = field(default_factory=dict)
    verdicts: list = field(default_factory=list)
    errors: list = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return not self.errors and all(v.passed for v in self.verdicts)

    def check(self, name, value, relation, threshold, note="") -> Verdict:
        v = verdict(name, value, relation, threshold, note)
        self.verdicts.append(v)
        return v

    def flag(self, name: str, ok: bool, margin: float, note: str = "") -> Verdict:
        """Boolean verdict whose outcome is decided by the sign of ``margin``."""
        v = Verdict(name, bool(ok), float(margin), 0.0, ">", float(margin), note)
        self.verdicts.append(v)
        return v

    def merge(self, other: "Report", prefix: str = "") -> None:
        for k, v in other.scalars.items():
            self.scalars[prefix + k] = v
        for k, t in other.tables.items():
            self.tables[prefix + k] = t
        for v in other.verdicts:
            self.verdicts.append(Verdict(prefix + v.name, v.passed, v.value, v.threshold,
                                         v.relation, v.margin, v.note))
        self.errors.extend(prefix + e for e in other.errors)

    def to_dict(self) -> dict:
        return {
            "title": self.title,
            "passed": self.passed,
            "scenario": self.scenario,
            "scalars": self.scalars,
            "verdicts": [
                {"name": v.name, "passed": v.passed, "value": v.value, "relation": v.relation,
                 "threshold": v.threshold, "margin": v.margin, "note": v.note}
                for v in self.verdicts
            ],
            "tables": {k: {"columns": t.columns, "rows": t.rows} for k, t in self.tables.items()},
            "errors": self.errors,
        }


def _encode(obj, out: list) -> None:
    if isinstance(obj, (bool, np.bool_)):
        out.append("true" if obj else "false")
    elif obj is None:
        out.append("null")
    elif isinstance(obj, (int, np.integer)):
        out.append(str(int(obj)))
    elif isinstance(obj, (float, np.floating)):
        x = float(obj)
        out.append(format(x, ".17g") if math.isfinite(x) else "null")
    elif isinstance(obj, str):
        out.append(json.dumps(obj))
    elif isinstance(obj, dict):
        out.append("{")
        for i, (k, v) in enumerate(obj.items()):
            if i:
                out.append(", ")
            out.append(json.dumps(str(k)))
            out.append(": ")
            _encode(v, out)
        out.append("}")
    elif isinstance(obj, (list, tuple, np.ndarray)):
        out.append("[")
        for i, v in enumerate(obj):
            if i:
                out.append(", ")
            _encode(v, out)
        out.append("]")
    elif hasattr(obj, "value") and isinstance(getattr(obj, "value"), str):  # enums
        out.append(json.dumps(obj.value))
    else:
        raise TypeError(f"cannot encode {type(obj).__name__}")


def to_json(report: Report) -> str:
    out: list = []
    _encode(report.to_dict(), out)
    return "".join(out) + "\n"


def _cell(x):
    if isinstance(x, (float, np.floating)):
        return format(float(x), ".17g")
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if hasattr(x, "value") and isinstance(getattr(x, "value"), str):
        return x.value
    return x


def to_csv(report: Report, table: str | None = None) -> str:
    """CSV of one row table: ``table`` by name, else the first, else the verdicts."""
    if table is not None:
        t = report.tables[table]
    elif report.tables:
        t = next(iter(report.tables.values()))
    else:
        t = Table(["name", "passed", "value", "relation", "threshold", "margin"],
                  [[v.name, v.passed, v.value, v.relation, v.threshold, v.margin]
                   for v in report.verdicts])
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\r\n")
    writer.writerow(t.columns)
    for row in t.rows:
        writer.writerow([_cell(x) for x in row])
    return buf.getvalue()


def emit(report: Report, fmt: str, path, table: str | None = None) -> None:
    if fmt == "json":
        text = to_json(report)
    elif fmt == "csv":
        text = to_csv(report, table)
    else:
        raise ValueError(f"unknown format {fmt!r}")
    with open(Path(path), "w", newline="", encoding="utf-8") as fh:
        fh.write(text)
