import csv
import json
import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest

from entropy_lab import cli, experiments, flow, variation
from entropy_lab.sphere import default_grid

SCENARIOS = Path(__file__).resolve().parents[1] / "scenarios"


def write(tmp_path, text, name="s.ini"):
    path = tmp_path / name
    path.write_text(text)
    return path


def test_lambda_scenario_header(tmp_path, capsys):
    cfg = write(tmp_path, "[scenario]\nname = rl\nkind = lambda\n[grid]\nl_max = 32\n")
    assert cli.main(["run", str(cfg), "--out", str(tmp_path / "out")]) == 0
    text = (tmp_path / "out" / "rl.csv").read_text()
    rows = list(csv.reader(text.splitlines()))
    assert rows[0] == ["name", "lambda", "multiplier", "residual", "iterations"]
    assert float(rows[1][1]) == pytest.approx(8 * np.pi, rel=1e-12)
    assert "PASS rl:lambda_rel_error" in capsys.readouterr().out


def test_every_check_row_carries_tolerance(tmp_path):
    art = experiments.run_scenario(SCENARIOS / "c03_fixed_class.ini", tmp_path)
    assert art.exit_code == 0
    rows = list(csv.DictReader((tmp_path / "fixed_class.checks.csv").read_text().splitlines()))
    assert rows and all(r["tolerance"] != "" for r in rows)
    data = json.loads((tmp_path / "fixed_class.json").read_text())
    assert data["config"]["kind"] == "variation_fixed_class"
    assert data["config"]["tolerances"]["closed_form_rel"] == 1e-4


def test_unknown_key_exits_2(tmp_path, capsys):
    cfg = write(tmp_path, "[scenario]\nname = x\nkind = lambda\n[grid]\nlmax_typo = 8\n")
    assert cli.main(["run", str(cfg), "--out", str(tmp_path)]) == 2
    assert "lmax_typo" in capsys.readouterr().err
    assert not list(tmp_path.glob("*.csv"))


@pytest.mark.parametrize("text", [
    "[scenario]\nname = x\nkind = nope\n",
    "[scenario]\nkind = lambda\n",
    "[scenario]\nname = x\nkind = lambda\n[extra]\nk = 1\n",
    "[scenario]\nname = x\nkind = lambda\n[tolerances]\nlambda_rel = -1\n",
    "[scenario]\nname = x\nkind = flow\n[parameters]\nmode = two\n",
])
def test_schema_errors(tmp_path, text):
    assert cli.main(["run", str(write(tmp_path, text)), "--out", str(tmp_path)]) == 2


def test_tol_overrides(tmp_path, capsys):
    cfg = SCENARIOS / "c01_round_lambda.ini"
    assert cli.main(["run", str(cfg), "--out", str(tmp_path), "--tol-overrides", "lambda_rel=1e-30"]) == 1
    assert cli.main(["run", str(cfg), "--out", str(tmp_path), "--tol-overrides", "bogus=1"]) == 2
    assert cli.main(["run", str(cfg), "--out", str(tmp_path), "--tol-overrides", "lambda_rel"]) == 2


def test_solver_error_exit_3(tmp_path):
    code = cli.main(["run", str(SCENARIOS / "spectrum.ini"), "--out", str(tmp_path),
                     "--tol-overrides", "collinearity=1e-30"])
    assert code == 3
    diag = json.loads((tmp_path / "spectrum.diagnostics.json").read_text())
    assert diag["error"] == "SolverError" and "residual" in diag["diagnostics"]


def test_strict_aliasing(tmp_path):
    cfg = write(tmp_path, "[scenario]\nname = al\nkind = lambda\n[grid]\nl_max = 8\n"
                          "[parameters]\nmodes = 12\namplitudes = 0.01\n")
    assert cli.main(["run", str(cfg), "--out", str(tmp_path), "--strict-aliasing"]) == 2
    with pytest.warns(UserWarning):
        assert cli.main(["run", str(cfg), "--out", str(tmp_path)]) == 0


def test_spectrum_matches_library_table(tmp_path):
    assert cli.main(["spectrum", "--l-max", "8", "--out", str(tmp_path)]) == 0
    rows = list(csv.DictReader((tmp_path / "spectrum.csv").read_text().splitlines()))
    table = variation.modal_table(default_grid(32), 8)
    assert [int(r["l"]) for r in rows] == list(range(9))
    for r, ref in zip(rows, table.rows()):
        for key in ("nu", "p0", "l1", "l1_prime", "p0_prime", "dstar_d"):
            assert float(r[key]) == ref[key]


def test_seed_controls_randomness(tmp_path):
    cfg = write(tmp_path, "[scenario]\nname = fr\nkind = f_response\n[grid]\nl_max = 16\n"
                          "[parameters]\nsamples = 2\n")
    outs = []
    for seed, sub in ((1, "a"), (1, "b"), (2, "c")):
        assert cli.main(["run", str(cfg), "--out", str(tmp_path / sub), "--seed", str(seed)]) == 0
        outs.append((tmp_path / sub / "fr.csv").read_bytes())
    assert outs[0] == outs[1] != outs[2]


def test_artifacts_are_byte_stable(tmp_path):
    for sub in ("a", "b"):
        experiments.run_scenario(SCENARIOS / "flow_p2.ini", tmp_path / sub)
    files = sorted(p.name for p in (tmp_path / "a").iterdir())
    assert files == sorted(p.name for p in (tmp_path / "b").iterdir())
    for name in files:
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()
    assert "wall" not in (tmp_path / "a" / "flow_p2.json").read_text()


def test_accept_empty_dir(tmp_path, capsys):
    assert cli.main(["accept", str(tmp_path)]) == 1
    out = capsys.readouterr().out
    assert out.count("ABSENT") == 10
    summary = json.loads((tmp_path / "acceptance_summary.json").read_text())
    assert {r["status"] for r in summary} == {"ABSENT"}


def test_accept_names_monotonicity_breach(tmp_path, monkeypatch, capsys):
    recs = [flow.FlowRecord(t, lam, 1e-9, 1e-9, 4 * np.pi)
            for t, lam in ((0.0, 25.0), (0.1, 25.1), (0.2, 25.0999), (0.3, 8 * np.pi))]
    state = flow.FlowState(metric=None, time=0.3, profile=None, history=recs, steps=3)

    def fake(*args, **kwargs):
        return flow.FlowResult(state, "converged_to_KE", 0.3)

    monkeypatch.setattr(experiments.flow, "run_to_convergence", fake)
    art = experiments.run_scenario(SCENARIOS / "flow_p2.ini", tmp_path)
    assert art.exit_code == 1
    assert cli.main(["accept", str(tmp_path)]) == 1
    out = capsys.readouterr().out
    line = next(l for l in out.splitlines() if l.startswith("criterion  8"))
    assert "FAIL" in line and "trajectory=run0 step=2 drop=" in line


def test_thread_cap_env(tmp_path, monkeypatch):
    monkeypatch.setenv("ENTROPY_LAB_THREADS", "zero")
    assert cli.main(["spectrum", "--out", str(tmp_path)]) == 2
    monkeypatch.setenv("ENTROPY_LAB_THREADS", "2")
    assert experiments.thread_cap() == 2


def test_flow_and_sweep_subcommands(tmp_path):
    assert cli.main(["flow", "--mode", "3", "--amplitude", "0.05", "--out", str(tmp_path)]) == 0
    assert (tmp_path / "flow.trajectory.csv").exists()
    assert cli.main(["sweep", "--modes", "2,3", "--amplitudes=-0.1,0.1", "--mixed-samples", "0",
                     "--out", str(tmp_path)]) == 1  # fewer than 12 runs fails the run-count check
    assert cli.main(["sweep", "--amplitudes", "0.2", "--out", str(tmp_path)]) == 2


def test_module_entry_point(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "entropy_lab", "accept", str(tmp_path)],
                          capture_output=True, text=True)
    assert proc.returncode == 1 and "ABSENT" in proc.stdout
    proc = subprocess.run([sys.executable, "-m", "entropy_lab"], capture_output=True, text=True)
    assert proc.returncode == 2
