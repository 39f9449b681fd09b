import csv
import json
import math

import numpy as np
import pytest

from halfspace_tl.app.main import main
from halfspace_tl.app.schemas.halfspace import Halfspace, LabeledDataset, MarginalKind, NoiseProfile
from halfspace_tl.app.services import selftest as selftest_service
from halfspace_tl.app.services.core import basis_vector
from halfspace_tl.app.services.dataset_loader import write_dataset
from halfspace_tl.app.services.synth import generate


def test_gen_writes_header_and_rows(tmp_path):
    out = tmp_path / "data.txt"
    assert main(["gen", "--d", "5", "--n", "1000", "--budget", "0", "--out", str(out)]) == 0
    lines = out.read_text().splitlines()
    assert lines[0] == "d=5 n=1000"
    assert len(lines) == 1001


def test_gen_reports_realized_opt(tmp_path, capsys):
    out = tmp_path / "data.txt"
    assert main(["gen", "--n", "1000", "--budget", "0.05", "--out", str(out)]) == 0
    assert "realized opt = 0.050" in capsys.readouterr().out


def test_gen_is_byte_reproducible(tmp_path):
    a, b = tmp_path / "a.txt", tmp_path / "b.txt"
    for out in (a, b):
        assert main(["gen", "--n", "500", "--budget", "0.02", "--threshold", "0.7", "--seed", "3", "--out", str(out)]) == 0
    assert a.read_bytes() == b.read_bytes()


def test_gen_needs_one_cell(tmp_path, capsys):
    assert main(["gen", "--budget", "0,0.1", "--out", str(tmp_path / "x.txt")]) == 1
    assert "exactly one" in capsys.readouterr().err


def test_config_file_and_flag_override(tmp_path):
    config = tmp_path / "run.env"
    config.write_text("D=3\nn=200\nthresholds=0.5\n")
    out = tmp_path / "data.txt"
    assert main(["gen", "--config", str(config), "--n", "300", "--out", str(out)]) == 0
    assert out.read_text().splitlines()[0] == "d=3 n=300"


def test_unknown_config_key(tmp_path):
    config = tmp_path / "run.env"
    config.write_text("d=3\ncolour=red\n")
    assert main(["gen", "--config", str(config), "--out", str(tmp_path / "x.txt")]) == 1


def test_invalid_budget_value(tmp_path):
    assert main(["gen", "--budget", "0.7", "--out", str(tmp_path / "x.txt")]) == 1


def test_unknown_flag_exits_with_usage_code():
    with pytest.raises(SystemExit) as info:
        main(["gen", "--bogus"])
    assert info.value.code == 1


def test_learn_missing_file(tmp_path):
    assert main(["learn", str(tmp_path / "nope.txt")]) == 1


def test_learn_truncated_file(tmp_path):
    out = tmp_path / "data.txt"
    assert main(["gen", "--d", "3", "--n", "200", "--out", str(out)]) == 0
    lines = out.read_text().splitlines()
    out.write_text("\n".join(lines[:150]) + "\n")
    assert main(["learn", str(out)]) == 1


def test_learn_constant_labels_accepts(tmp_path, capsys):
    n = 150_000
    x = np.random.default_rng(0).standard_normal((n, 3))
    path = tmp_path / "negative.txt"
    write_dataset(LabeledDataset(x=x, y=np.full(n, -1)), str(path))

    assert main(["learn", str(path), "--epsilon", "0.2", "--tau", "0.37"]) == 0
    out = capsys.readouterr().out
    assert "verdict: accept" in out
    assert "chosen t: -inf" in out
    assert "holdout error: 0.0000" in out


def test_learn_uniform_cube_rejects(tmp_path, capsys):
    n = 150_000
    S = generate(3, n, MarginalKind.parse("uniform_cube"), Halfspace(v=basis_vector(3)), NoiseProfile(), seed=1)
    path = tmp_path / "cube.txt"
    write_dataset(S, str(path))

    assert main(["learn", str(path), "--epsilon", "0.2", "--tau", "0.37"]) == 2
    out = capsys.readouterr().out
    assert "boosting_majority" in out
    assert "moments" in out


def _sweep_config(tmp_path):
    config = tmp_path / "sweep.env"
    config.write_text(
        "\n".join(
            [
                "d=3",
                "n=20000",
                "epsilon=0.25",
                "seed=5",
                "budgets=0",
                "thresholds=0",
                "trials=2",
                "holdout=5000",
            ]
        )
        + "\n"
    )
    return config


def test_sweep_rows_summary_and_reproducibility(tmp_path, monkeypatch, capsys):
    monkeypatch.delenv("HALFSPACE_TL_WORKERS", raising=False)
    config = _sweep_config(tmp_path)
    first, second = tmp_path / "first", tmp_path / "second"
    assert main(["sweep", "--config", str(config), "--out", str(first)]) == 0
    assert main(["sweep", "--config", str(config), "--out", str(second)]) == 0

    csv_bytes = (tmp_path / "first.csv").read_bytes()
    assert csv_bytes == (tmp_path / "second.csv").read_bytes()

    with open(tmp_path / "first.csv", newline="") as fh:
        rows = list(csv.DictReader(fh))
    assert len(rows) == 2
    assert [row["trial"] for row in rows] == ["0", "1"]
    assert all(row["seconds"] == "" for row in rows)
    for row in rows:
        if row["verdict"] == "accept":
            assert float(row["error"]) <= 0.25

    summary = json.loads((tmp_path / "first.json").read_text())
    assert summary["rows"] == 2
    assert summary["config"]["d"] == 3
    assert len(summary["cells"]) == 1
    assert summary["fitted_constant"] is None
    assert "wrote" in capsys.readouterr().out


@pytest.mark.parametrize("value", ["four", "2.5", "0", "-3", ""])
def test_sweep_rejects_bad_worker_count(tmp_path, monkeypatch, capsys, value):
    monkeypatch.setenv("HALFSPACE_TL_WORKERS", value)
    assert main(["sweep", "--config", str(_sweep_config(tmp_path)), "--out", str(tmp_path / "out")]) == 1
    assert "HALFSPACE_TL_WORKERS" in capsys.readouterr().err
    assert not (tmp_path / "out.csv").exists()


def test_sweep_grid_arithmetic(monkeypatch):
    from halfspace_tl.app.commands import sweep
    from halfspace_tl.app.schemas.experiment import ExperimentConfig, SweepRow

    def fake_trial(config, bi, ti, trial):
        return SweepRow(budget=config.budgets[bi], t_star=config.thresholds[ti], trial=trial, verdict="accept", error=0.01)

    monkeypatch.setattr(sweep, "run_trial", fake_trial)
    config = ExperimentConfig(budgets="0,0.005,0.02", thresholds="0,1,2", trials=20)
    rows = sweep.run_grid(config)
    assert len(rows) == 180
    summary = sweep.summarize(config, rows)
    assert len(summary.cells) == 9
    assert summary.acceptance_rate == 1.0
    # opt = 0.005 -> 0.01 / sqrt(0.005) and opt = 0.02 -> 0.01 / sqrt(0.02)
    assert summary.fitted_constant == pytest.approx(np.median([0.01 / math.sqrt(0.005)] * 60 + [0.01 / math.sqrt(0.02)] * 60))


def test_selftest_reports_failures(monkeypatch, capsys):
    monkeypatch.setattr(
        selftest_service,
        "CHECKS",
        [
            ("always", lambda seed: (True, "fine")),
            ("never", lambda seed: (False, "broken")),
            ("crashes", lambda seed: 1 / 0),
        ],
    )
    assert main(["selftest"]) == 1
    out = capsys.readouterr().out
    assert "PASS always fine" in out
    assert "FAIL never broken" in out
    assert "FAIL crashes raised ZeroDivisionError" in out
    assert "2 of 3 properties failed" in out


def test_selftest_all_pass(monkeypatch, capsys):
    monkeypatch.setattr(selftest_service, "CHECKS", [("always", lambda seed: (True, "fine"))])
    assert main(["selftest", "--seed", "4"]) == 0
    assert "all 1 properties passed" in capsys.readouterr().out


@pytest.mark.slow
def test_learn_clean_file(tmp_path, capsys):
    out = tmp_path / "clean.txt"
    assert main(["gen", "--d", "5", "--n", "400000", "--threshold", "-1", "--out", str(out)]) == 0
    assert main(["learn", str(out), "--epsilon", "0.2", "--tau", "0.37"]) == 0
    report = capsys.readouterr().out
    holdout_line = next(line for line in report.splitlines() if line.startswith("holdout error"))
    assert float(holdout_line.split()[2]) <= 0.2


@pytest.mark.slow
def test_full_selftest_passes(capsys):
    assert main(["selftest"]) == 0
