"""Experiment reports and their on-disk form (JSON + snapshot CSVs + manifest)."""

from __future__ import annotations

import hashlib
import json
import math
import os
from dataclasses import dataclass, field

import numpy as np


def _jsonable(x):
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, np.ndarray):
        return [_jsonable(v) for v in x.tolist()]
    if isinstance(x, (np.bool_, bool)):
        return bool(x)
    if isinstance(x, np.integer):
        return int(x)
    if isinstance(x, (np.floating, float)):
        x = float(x)
        return x if math.isfinite(x) else repr(x)
    return x


@dataclass
class Metric:
    """One judged quantity: passes iff ``value <op> tolerance``."""

    name: str
    value: float
    tolerance: float
    op: str = "<="
    t: float | None = None
    omega: int | None = None

    @property
    def passed(self):
        v, tol = self.value, self.tolerance
        if v is None or (isinstance(v, float) and math.isnan(v)):
            return False
        return {"<=": v <= tol, ">=": v >= tol, "<": v < tol, ">": v > tol, "==": v == tol}[self.op]

    def as_dict(self):
        d = {"name": self.name, "value": self.value, "tolerance": self.tolerance,
             "op": self.op, "passed": self.passed}
        if self.t is not None:
            d["t"] = self.t
        if self.omega is not None:
            d["omega"] = self.omega
        return d


@dataclass
class ExperimentReport:
    experiment_id: str
    config: dict
    metrics: list = field(default_factory=list)
    data: dict = field(default_factory=dict)
    notes: list = field(default_factory=list)

    def add(self, name, value, tolerance, op="<=", t=None, omega=None):
        m = Metric(name, value, tolerance, op, t, omega)
        self.metrics.append(m)
        return m

    @property
    def passed(self):
        return all(m.passed for m in self.metrics)

    def failed(self):
        return [m for m in self.metrics if not m.passed]

    def as_dict(self):
        return _jsonable({
            "experiment_id": self.experiment_id,
            "passed": self.passed,
            "metrics": [m.as_dict() for m in self.metrics],
            "data": self.data,
            "notes": self.notes,
            "config": self.config,
        })

    def to_json(self):
        return json.dumps(self.as_dict(), indent=2, sort_keys=True) + "\n"


def snapshot_name(experiment, omega, t, tag):
    return f"{experiment}_w{omega:03d}_t{t:.6f}_{tag}.csv"


def _sha256(path):
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


def write_outputs(report, snapshots, out_dir):
    """Write report.json, snapshot CSVs and manifest.json; return the manifest.

    ``snapshots`` is a list of (omega, t, tag, DensityField).
    """
    os.makedirs(out_dir, exist_ok=True)
    files = []
    path = os.path.join(out_dir, "report.json")
    with open(path, "w") as fh:
        fh.write(report.to_json())
    files.append(path)
    for omega, t, tag, fld in snapshots:
        path = os.path.join(out_dir, snapshot_name(report.experiment_id, omega, t, tag))
        fld.to_csv(path)
        files.append(path)
    manifest = {
        "experiment_id": report.experiment_id,
        "passed": report.passed,
        "files": [{"path": os.path.basename(p), "sha256": _sha256(p)} for p in files],
    }
    with open(os.path.join(out_dir, "manifest.json"), "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return manifest
