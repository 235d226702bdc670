import csv
import json

import pytest

from scorecomp.harness.cli import main
from scorecomp.harness.report import CSV_COLUMNS

SMALL = """
seed: 3
theorem: {n_models: 3}
vrs: {n_seeds: 100, n_boot: 100}
sweep: {n_models: 2}
condition: {n_runs: 3, n_energy: 40, n_permutations: 19, n_correlation: 60}
sample: {n_samples: 4}
"""


@pytest.fixture
def small_config(tmp_path):
    path = tmp_path / "small.yaml"
    path.write_text(SMALL)
    return path


def _rows(path):
    with open(path, newline="") as fh:
        return list(csv.reader(fh))


def test_validate_theorem_cli(tmp_path, small_config):
    out = tmp_path / "thm"
    assert main(["validate-theorem", "--config", str(small_config), "--out", str(out)]) == 0
    rows = _rows(out / "report.csv")
    assert tuple(rows[0]) == CSV_COLUMNS
    assert all(r[0] == "validate-theorem" for r in rows[1:])
    doc = json.loads((out / "report.json").read_text())
    assert doc["provenance"]["seed"] == 3 and len(doc["provenance"]["config_hash"]) == 64


def test_seed_flag_overrides_config(tmp_path, small_config):
    out = tmp_path / "sweep"
    assert main(["sweep-s", "--config", str(small_config), "--seed", "42", "--out", str(out)]) == 0
    assert json.loads((out / "report.json").read_text())["provenance"]["seed"] == 42


def test_sample_cli_with_snapshots(tmp_path, small_config):
    out = tmp_path / "sample"
    assert main(["sample", "--config", str(small_config), "--out", str(out), "--snapshots"]) == 0
    snaps = sorted((out / "snapshots").glob("*.csv"))
    assert len(snaps) == 50
    rows = _rows(snaps[0])
    assert rows[0][:6] == ["step", "repeat", "sigma", "seed", "view", "frame"]
    assert len(rows) == 1 + 4 * 3 * 4
    assert (out / "samples.csv").exists()


def test_failed_metric_exits_nonzero(tmp_path):
    cfg = tmp_path / "bad.yaml"
    cfg.write_text("theorem: {n_models: 2, control_wiring: tree}\n")
    assert main(["validate-theorem", "--config", str(cfg), "--out", str(tmp_path / "o")]) == 1
    flags = {r[1]: r[4] for r in _rows(tmp_path / "o" / "report.csv")[1:]}
    assert flags["control_fraction_above_threshold"] == "false"


def test_unknown_config_key(tmp_path, capsys):
    cfg = tmp_path / "typo.yaml"
    cfg.write_text("schedule: {n_step: 10}\n")
    assert main(["sweep-s", "--config", str(cfg), "--out", str(tmp_path / "o")]) == 2
    assert "unknown key" in capsys.readouterr().err


def test_bad_seed_rejected(tmp_path):
    with pytest.raises(SystemExit):
        main(["sweep-s", "--seed", "-1", "--out", str(tmp_path)])
    with pytest.raises(SystemExit):
        main(["sweep-s", "--seed", str(2**64), "--out", str(tmp_path)])


def test_report_runs_everything_and_is_reproducible(tmp_path, small_config):
    codes = [main(["report", "--config", str(small_config), "--out", str(tmp_path / name)]) for name in ("a", "b")]
    assert codes[0] == codes[1]
    a = (tmp_path / "a" / "report.csv").read_bytes()
    assert a == (tmp_path / "b" / "report.csv").read_bytes()
    scenarios = {r[0] for r in _rows(tmp_path / "a" / "report.csv")[1:]}
    assert scenarios == {"validate-theorem", "sample", "ablate-vrs", "sweep-s", "condition-check"}
    for name in scenarios:
        assert (tmp_path / "a" / name / "report.csv").exists()
