"""Command-line entry point.

Every subcommand writes ``report.csv`` and ``report.json`` under ``--out``
and exits 1 when any checked metric fails.  ``report`` runs all scenarios
into subdirectories and writes the concatenated report at the top level.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import scenarios
from .config import ConfigError, load_config
from .report import CSV_COLUMNS, RunReport, write_snapshots

log = logging.getLogger("scorecomp")

U64_MAX = 2**64 - 1


def _u64(text: str) -> int:
    value = int(text, 0)
    if not 0 <= value <= U64_MAX:
        raise argparse.ArgumentTypeError("seed must be an unsigned 64-bit integer")
    return value


def _write_samples(out_dir: Path, samples: np.ndarray, seeds) -> Path:
    path = out_dir / "samples.csv"
    b, v, f, d = samples.shape
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["seed", "view", "frame", *[f"x{k}" for k in range(d)]])
        for n in range(b):
            for i in range(v):
                for j in range(f):
                    writer.writerow([seeds[n], i, j, *[repr(float(c)) for c in samples[n, i, j]]])
    return path


def _run_sample(cfg, seed, out: Path, snapshots: bool) -> RunReport:
    report, samples, run, seeds = scenarios.run_sample(cfg, seed, snapshots=snapshots)
    out.mkdir(parents=True, exist_ok=True)
    _write_samples(out, samples, seeds)
    if snapshots:
        write_snapshots(out, run.snapshots, seeds)
    return report


def _run_vrs(cfg, seed, out: Path, snapshots: bool) -> RunReport:
    # bimodality metrics need the trajectory regardless; --snapshots only controls the files
    report = scenarios.run_ablate_vrs(cfg, seed, snapshots=True)
    if snapshots:
        vr = cfg.vrs
        seeds = scenarios.derive_seeds(seed, scenarios._VRS, vr.n_seeds)
        _, run = scenarios._vrs_arm(cfg, seeds, vr.delta, vr.n_rollback, True)
        write_snapshots(out, run.snapshots, seeds)
    return report


RUNNERS = {
    "validate-theorem": lambda cfg, seed, out, snap: scenarios.run_validate_theorem(cfg, seed),
    "sample": _run_sample,
    "ablate-vrs": _run_vrs,
    "sweep-s": lambda cfg, seed, out, snap: scenarios.run_sweep_s(cfg, seed),
    "condition-check": lambda cfg, seed, out, snap: scenarios.run_condition_check(cfg, seed),
}


def _write_combined(out: Path, reports: list[RunReport]):
    out.mkdir(parents=True, exist_ok=True)
    with (out / "report.csv").open("w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(CSV_COLUMNS)
        for rep in reports:
            writer.writerows(rep.csv_rows())
    doc = {
        "passed": all(r.passed for r in reports),
        "scenarios": [r.to_dict() for r in reports],
    }
    (out / "report.json").write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="scorecomp", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in (*RUNNERS, "report"):
        p = sub.add_parser(name)
        p.add_argument("--config", type=Path, default=None, help="YAML config (defaults apply when omitted)")
        p.add_argument("--seed", type=_u64, default=None, help="overrides the config seed")
        p.add_argument("--out", type=Path, default=Path("out") / name, help="output directory (default: out/<command>)")
        p.add_argument("--snapshots", action="store_true", help="write per-step snapshots/*.csv")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        cfg = load_config(args.config)
    except (ConfigError, OSError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    seed = cfg.seed if args.seed is None else args.seed

    if args.command == "report":
        reports = []
        for name, runner in RUNNERS.items():
            sub_out = args.out / name
            rep = runner(cfg, seed, sub_out, args.snapshots)
            rep.write(sub_out)
            reports.append(rep)
        _write_combined(args.out, reports)
    else:
        rep = RUNNERS[args.command](cfg, seed, args.out, args.snapshots)
        rep.write(args.out)
        reports = [rep]

    failed = [(r.scenario, m) for r in reports for m in r.failures]
    for scenario, m in failed:
        print(f"FAIL {scenario} {m.name} = {m.value!r} (want {m.tolerance})", file=sys.stderr)
    print(f"{'ok' if not failed else 'failed'}: wrote {args.out / 'report.csv'}")
    return 1 if failed else 0


if __name__ == "__main__":
    sys.exit(main())
