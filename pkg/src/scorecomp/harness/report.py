"""Run reports: a flat CSV for CI and a JSON document with everything."""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .. import kernels

CODE_VERSION = "scorecomp 0.1.0"
CSV_COLUMNS = ("scenario", "metric", "value", "tolerance", "pass")


@dataclass
class Metric:
    name: str
    value: float
    tolerance: str = ""
    passed: bool | None = None  # None: informational only

    def __post_init__(self):
        self.value = float(self.value)
        if not math.isfinite(self.value):
            raise ValueError(f"metric {self.name} is not finite: {self.value}")


@dataclass
class RunReport:
    scenario: str
    seed: int
    config_hash: str
    metrics: list[Metric] = field(default_factory=list)
    instrumentation: dict = field(default_factory=dict)
    details: dict = field(default_factory=dict)

    def add(self, name: str, value: float, tolerance: str = "", passed: bool | None = None) -> Metric:
        m = Metric(name, value, tolerance, None if passed is None else bool(passed))
        self.metrics.append(m)
        return m

    def check(self, name: str, value: float, ok: bool, tolerance: str) -> Metric:
        return self.add(name, value, tolerance, ok)

    @property
    def passed(self) -> bool:
        return all(m.passed is not False for m in self.metrics)

    @property
    def failures(self) -> list[Metric]:
        return [m for m in self.metrics if m.passed is False]

    def metric(self, name: str) -> Metric:
        for m in self.metrics:
            if m.name == name:
                return m
        raise KeyError(name)

    def csv_rows(self) -> list[tuple[str, str, str, str, str]]:
        rows = []
        for m in self.metrics:
            flag = "" if m.passed is None else ("true" if m.passed else "false")
            rows.append((self.scenario, m.name, repr(m.value), m.tolerance, flag))
        return rows

    def to_dict(self) -> dict:
        return {
            "scenario": self.scenario,
            "passed": self.passed,
            "provenance": {
                "config_hash": self.config_hash,
                "seed": self.seed,
                "code_version": CODE_VERSION,
                "kernel_backend": kernels.BACKEND,
            },
            "metrics": [
                {"name": m.name, "value": m.value, "tolerance": m.tolerance, "pass": m.passed}
                for m in self.metrics
            ],
            "instrumentation": _jsonable(self.instrumentation),
            "details": _jsonable(self.details),
        }

    def write(self, out_dir: str | Path) -> tuple[Path, Path]:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        csv_path = out / "report.csv"
        with csv_path.open("w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(CSV_COLUMNS)
            writer.writerows(self.csv_rows())
        json_path = out / "report.json"
        json_path.write_text(json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n")
        return csv_path, json_path


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.floating, np.integer, np.bool_)):
        return obj.item()
    return obj


def read_report_csv(path: str | Path) -> list[dict]:
    with Path(path).open(newline="") as fh:
        return list(csv.DictReader(fh))


def write_snapshots(out_dir: str | Path, snapshots, seeds) -> list[Path]:
    """One CSV per composed step: step, repeat, sigma, seed, view, frame, coordinates."""
    snap_dir = Path(out_dir) / "snapshots"
    snap_dir.mkdir(parents=True, exist_ok=True)
    paths = []
    for snap in snapshots:
        state = np.asarray(snap.state)
        if state.ndim == 3:
            state = state[None]
        b, v, f, d = state.shape
        path = snap_dir / f"step{snap.step:03d}_repeat{snap.repeat}.csv"
        with path.open("w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["step", "repeat", "sigma", "seed", "view", "frame", *[f"x{k}" for k in range(d)]])
            for n in range(b):
                for i in range(v):
                    for j in range(f):
                        writer.writerow([snap.step, snap.repeat, repr(float(snap.sigma)), seeds[n], i, j,
                                         *[repr(float(c)) for c in state[n, i, j]]])
        paths.append(path)
    return paths
