import json
import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest

from beamscatter.cli import main
from beamscatter.reporting import read_csv
from beamscatter.checkpoint import read_checkpoint

CONFIGS = Path(__file__).resolve().parent.parent / "configs"


def run_cli(tmp_path, name, *extra, out="out"):
    target = tmp_path / out
    code = main([name, "--config", str(CONFIGS / extra[0]), "--out", str(target), *extra[1:]])
    return code, target


def test_single_mode_matches_closed_form(tmp_path):
    code, out = run_cli(tmp_path, "simulate", "single_mode.ini")
    assert code == 0
    summary = json.loads((out / "summary.json").read_text())
    assert summary["passed"] and summary["report"]["closed_form_error"] <= 1e-9
    cols, data = read_csv(out / "diagnostics.csv")
    assert "t" in cols and data.shape[0] == 11
    E = data[:, cols.index("E")]
    assert np.max(np.abs(E - E[0])) <= 1e-12 * abs(E[0])
    assert (out / "final.ckpt").exists()


def test_header_block(tmp_path):
    _, out = run_cli(tmp_path, "simulate", "single_mode.ini")
    lines = (out / "diagnostics.csv").read_text().splitlines()
    assert lines[0] == "# beamscatter diagnostics format_version=1"
    keys = [ln[2:].split("=", 1)[0] for ln in lines if ln.startswith("# ") and "=" in ln[2:]]
    assert {"config", "settings", "subcommand"} <= set(keys)
    cfg = json.loads(next(ln for ln in lines if ln.startswith("# config="))[len("# config="):])
    assert cfg["physics"]["m"] == 1.0


def test_checkpoint_holds_final_state(tmp_path):
    _, out = run_cli(tmp_path, "simulate", "single_mode.ini")
    st, params, t = read_checkpoint(out / "final.ckpt")
    assert t == pytest.approx(2.0)
    assert params.lam == 0.0 and np.all(np.isfinite(st.u))


def test_repeat_runs_are_byte_identical(tmp_path):
    _, a = run_cli(tmp_path, "simulate", "single_mode.ini", out="a")
    _, b = run_cli(tmp_path, "simulate", "single_mode.ini", out="b")
    for name in ("diagnostics.csv", "summary.json", "final.ckpt"):
        assert (a / name).read_bytes() == (b / name).read_bytes(), name


def test_failing_assertion_exits_one(tmp_path):
    code, out = run_cli(tmp_path, "simulate", "single_mode.ini", "--override", "experiment.closed_form_tol=0")
    assert code == 1
    assert json.loads((out / "summary.json").read_text())["assertions"]["closed_form"] is False


def test_malformed_config_exits_two(tmp_path, capsys):
    bad = tmp_path / "bad.ini"
    bad.write_text("[grid]\nn = 2\npoints = sixty\n")
    assert main(["simulate", "--config", str(bad), "--out", str(tmp_path / "o")]) == 2
    assert "configuration error" in capsys.readouterr().err


def test_unknown_experiment_key_exits_two(tmp_path):
    code, _ = run_cli(tmp_path, "simulate", "single_mode.ini", "--override", "experiment.bogus=1")
    assert code == 2


def test_wraparound_guard(tmp_path):
    code, _ = run_cli(tmp_path, "simulate", "single_mode.ini", "--override", "time.T=1000")
    assert code == 2


def test_lp_subcommand_small(tmp_path):
    code, out = run_cli(
        tmp_path, "lp-test", "lp_test.ini", "--override", "experiment.fields=4",
        "--override", "grid.points=64", "--override", "grid.L=32",
    )
    assert code == 0
    summary = json.loads((out / "summary.json").read_text())
    assert summary["passed"] and summary["subcommand"] == "lp-test"


def test_console_script_entry_point(tmp_path):
    res = subprocess.run(
        [sys.executable, "-m", "beamscatter.cli", "simulate", "--config", str(CONFIGS / "single_mode.ini"),
         "--out", str(tmp_path / "o")],
        capture_output=True, text=True,
    )
    assert res.returncode == 0, res.stderr
