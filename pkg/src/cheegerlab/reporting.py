"""Run records, the flat experiment CSV, and run-to-run comparison.

One long-format CSV holds every quantity of every pipeline:
``spec,resolution,p,k,mode,quantity,value,witness_file``.  Rows are sorted
and floats formatted deterministically so identical configs reproduce
byte-identical files.
"""

from __future__ import annotations

import csv
import hashlib
import json
import math
import os
from dataclasses import dataclass, field as dfield

CSV_COLUMNS = ["spec", "resolution", "p", "k", "mode", "quantity", "value",
               "witness_file"]


def fmt(value) -> str:
    if isinstance(value, float):
        if math.isnan(value):
            return "nan"
        if math.isinf(value):
            return "inf" if value > 0 else "-inf"
        return format(value, ".12g")
    return str(value)


@dataclass
class Row:
    spec: str
    resolution: int
    p: float
    k: int
    mode: str
    quantity: str
    value: float
    witness_file: str = ""

    def as_list(self) -> list[str]:
        return [self.spec, str(self.resolution), fmt(self.p), str(self.k),
                self.mode, self.quantity, fmt(self.value), self.witness_file]

    def sort_key(self):
        return (self.spec, self.resolution, self.p, self.k, self.mode,
                self.quantity)


@dataclass
class Flag:
    """A named inequality with both measured sides."""

    name: str
    lhs: float
    rhs: float
    passed: bool


@dataclass
class RunRecord:
    config: dict
    config_hash: str
    rows: list[Row] = dfield(default_factory=list)
    flags: list[Flag] = dfield(default_factory=list)
    timings: dict = dfield(default_factory=dict)

    @property
    def all_passed(self) -> bool:
        return all(f.passed for f in self.flags)

    def add(self, spec, resolution, p, k, mode, quantity, value, witness_file=""):
        self.rows.append(Row(spec, resolution, float(p), int(k), mode,
                             quantity, float(value), witness_file))

    def flag(self, name, lhs, rhs, passed):
        self.flags.append(Flag(name, float(lhs), float(rhs), bool(passed)))


def config_hash(config: dict) -> str:
    canon = json.dumps(config, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canon.encode()).hexdigest()[:16]


def write_csv(record: RunRecord, path: str) -> None:
    rows = sorted(record.rows, key=Row.sort_key)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(CSV_COLUMNS)
        for row in rows:
            writer.writerow(row.as_list())


def write_summary(record: RunRecord, path: str) -> None:
    doc = {
        "config": record.config,
        "config_hash": record.config_hash,
        "timings": record.timings,
        "flags": [{"name": f.name, "lhs": f.lhs, "rhs": f.rhs,
                   "passed": f.passed} for f in record.flags],
        "quantities": {
            f"{r.spec}/{r.resolution}/{fmt(r.p)}/{r.k}/{r.mode}/{r.quantity}": r.value
            for r in record.rows
        },
    }
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")


def write_witness(indices, path: str) -> None:
    with open(path, "w") as fh:
        for i in indices:
            fh.write(f"{int(i)}\n")


def load_summary(path: str) -> dict:
    with open(path) as fh:
        doc = json.load(fh)
    if "quantities" not in doc:
        raise ValueError(f"{path} is not a run summary (missing 'quantities')")
    return doc


def compare(baseline_path: str, current_path: str,
            rel_tolerance: float = 1e-9) -> dict:
    """Per-quantity relative differences and a regression verdict.

    New quantities in the current record are reported, not failed; missing
    ones and out-of-tolerance drifts are regressions.
    """
    base = load_summary(baseline_path)["quantities"]
    cur = load_summary(current_path)["quantities"]
    diffs = {}
    regressions = []
    for key, bval in base.items():
        if key not in cur:
            regressions.append({"key": key, "kind": "missing"})
            continue
        cval = cur[key]
        denom = max(abs(bval), abs(cval), 1e-300)
        rel = abs(cval - bval) / denom
        if rel > rel_tolerance:
            diffs[key] = {"baseline": bval, "current": cval, "rel": rel}
            regressions.append({"key": key, "kind": "drift", "rel": rel})
    added = sorted(set(cur) - set(base))
    return {"diffs": diffs, "regressions": regressions, "added": added,
            "ok": not regressions}
