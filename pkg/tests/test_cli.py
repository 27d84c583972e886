import json
import subprocess
import sys

import pytest

from occupancy.cli import _settings, build_parser, main
from occupancy.optim import OptimSettings


@pytest.fixture
def frog_json(tmp_path):
    path = tmp_path / "frog.json"
    path.write_text(json.dumps({"S": 27, "tau": 4, "f0": 12, "y": 47, "b": 36}))
    return path


def test_fit_all_methods(frog_json, tmp_path):
    out = tmp_path / "fit.json"
    assert main(["fit", "--input", str(frog_json), "--method", "all", "--out", str(out)]) == 0
    fits = {row["method"]: row for row in json.loads(out.read_text())["fits"]}
    assert set(fits) == {"partial", "full", "two_stage"}
    assert fits["partial"]["p_hat"] == pytest.approx(0.889, abs=0.001)
    assert fits["partial"]["se_psi"] == pytest.approx(0.096, abs=0.001)
    for m in ("full", "two_stage"):
        assert fits[m]["p_hat"] == pytest.approx(0.780, abs=0.005)
        assert fits[m]["psi_hat"] == pytest.approx(0.557, abs=0.005)
        assert fits[m]["se_p"] == pytest.approx(0.054, abs=0.005)


def test_fit_csv_matrix(tmp_path, capsys):
    m = tmp_path / "m.csv"
    m.write_text("v1,v2,v3\n1,0,1\n0,0,0\n0,1,1\n1,1,0\n")
    assert main(["fit", "--input", str(m), "--method", "partial", "--format", "csv"]) == 0
    lines = capsys.readouterr().out.strip().split("\n")
    assert len(lines) == 2 and lines[1].startswith("partial,")


def test_partial_without_b_is_input_error(tmp_path, capsys):
    stats = tmp_path / "s.json"
    stats.write_text('{"S": 27, "tau": 4, "f0": 12, "y": 47}')
    out = tmp_path / "out.json"
    assert main(["fit", "--input", str(stats), "--method", "partial", "--out", str(out)]) == 2
    assert "needs b" in capsys.readouterr().err
    assert not out.exists()
    # 'all' skips the partial estimator instead
    assert main(["fit", "--input", str(stats), "--method", "all", "--out", str(out)]) == 0
    assert [r["method"] for r in json.loads(out.read_text())["fits"]] == ["full", "two_stage"]


def test_invalid_input_leaves_no_file(tmp_path):
    bad = tmp_path / "bad.csv"
    bad.write_text("1,2\n0,0\n")
    out = tmp_path / "out.json"
    assert main(["fit", "--input", str(bad), "--method", "all", "--out", str(out)]) == 2
    assert not out.exists()
    assert list(tmp_path.iterdir()) == [bad]


def test_degenerate_data_exit_code(tmp_path):
    zeros = tmp_path / "z.csv"
    zeros.write_text("0,0\n0,0\n")
    assert main(["fit", "--input", str(zeros), "--method", "full"]) == 3


def test_simulate_is_reproducible(tmp_path):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    args = ["simulate", "--sites", "30", "--occasions", "4", "--psi", "0.6", "--p", "0.5", "--seed", "9"]
    assert main(args + ["--out", str(a)]) == 0
    assert main(args + ["--out", str(b)]) == 0
    assert a.read_bytes() == b.read_bytes()
    rows = a.read_text().strip().split("\n")
    assert len(rows) == 30 and all(len(r.split(",")) == 4 for r in rows)
    assert main(["fit", "--input", str(a), "--method", "all", "--out", str(tmp_path / "f.json")]) == 0


def test_simulate_rejects_bad_probability():
    assert main(["simulate", "--sites", "3", "--occasions", "2", "--psi", "1.5", "--p", "0.5", "--seed", "1"]) == 2


def test_study_byte_identical(tmp_path):
    cfg = tmp_path / "cells.json"
    cfg.write_text(json.dumps([{"S": 27, "tau": 4, "psi": 0.6, "p": 0.6, "n_sim": 20},
                               {"S": 100, "tau": 5, "psi": 0.6, "p": 0.05, "n_sim": 20}]))
    outs = []
    for name, jobs in (("a.csv", "1"), ("b.csv", "1"), ("c.csv", "2")):
        out = tmp_path / name
        assert main(["study", "--config", str(cfg), "--seed", "3", "--drop-boundary",
                     "--jobs", jobs, "--out", str(out)]) == 0
        outs.append(out.read_bytes())
    assert outs[0] == outs[1] == outs[2]
    text = outs[0].decode()
    for label in ("Median estimate", "Median SE", "MAD", "Efficiency"):
        assert f",{label}," in text
    json_out = tmp_path / "s.json"
    assert main(["study", "--config", str(cfg), "--seed", "3", "--out", str(json_out)]) == 0
    assert len(json.loads(json_out.read_text())["cells"]) == 2


def test_sensitivity_command(tmp_path):
    stats = tmp_path / "s.json"
    stats.write_text('{"S": 77, "tau": 3, "f0": 45, "y": 57}')
    out = tmp_path / "sens.csv"
    assert main(["sensitivity", "--input", str(stats), "--grid", "99", "--p-hat", "0.54",
                 "--out", str(out)]) == 0
    lines = out.read_text().strip().split("\n")
    assert len(lines) == 101
    assert float(lines[99].split(",")[1]) == pytest.approx(0.4156, abs=5e-4)
    assert lines[-1].startswith("0.54,")


def test_settings_precedence(tmp_path, monkeypatch):
    monkeypatch.setenv("OCC_TOL_X", "1e-7")
    monkeypatch.setenv("OCC_MAX_ITER", "40")
    parser = build_parser()
    args = parser.parse_args(["fit", "--input", "x.json", "--method", "full", "--max-iter", "60"])
    assert _settings(args) == OptimSettings(tol_x=1e-7, max_iter=60)
    cfg = tmp_path / "opt.json"
    cfg.write_text('{"max_iter": 80}')
    args = parser.parse_args(["fit", "--input", "x.json", "--method", "full", "--max-iter", "60",
                              "--optim-config", str(cfg)])
    assert _settings(args) == OptimSettings(tol_x=1e-7, max_iter=80)


def test_console_entry_point(frog_json):
    proc = subprocess.run([sys.executable, "-m", "occupancy.cli", "fit", "--input", str(frog_json),
                           "--method", "two_stage", "--format", "csv"],
                          capture_output=True, text=True, check=True)
    assert proc.stdout.startswith("method,psi_hat")
