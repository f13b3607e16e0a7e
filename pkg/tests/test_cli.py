import csv
import json
import subprocess
import sys

import numpy as np
import pytest

from blowuplab import cli
from blowuplab import io as bio

GENERAL = {"kind": "general", "matrix": [[1.0, 0.0], [0.0, 3.0]], "H": {"kernel": "euclidean", "alpha": 1.0},
           "perturbation": {"family": "power", "params": {"M": 0.5, "delta": 0.5}}, "y0": [1.0, 1.0]}
REFERENCE = {"kind": "reference", "a": 1.0, "alpha": 2.0, "y0": [1.0]}
MANUFACTURED = {"kind": "forced", "matrix": [[1.0]], "H": {"kernel": "euclidean", "alpha": 2.0},
                "oracle": {"Tstar": 0.5, "xi": [0.7071067811865476], "corrector": {"kind": "power", "delta": 0.5}}}
NEGATIVE = {"kind": "general", "matrix": [[-1.0, 0.0], [0.0, 3.0]], "H": {"kernel": "euclidean", "alpha": 1.0},
            "y0": [1.0, 1.0]}


def write(tmp_path, name, obj):
    p = tmp_path / name
    p.write_text(json.dumps(obj))
    return str(p)


def simulate(tmp_path, problem, *extra, out="run"):
    cfg = write(tmp_path, "problem.json", problem)
    code = cli.main(["simulate", "--config", cfg, "--out", str(tmp_path / out), *extra])
    return code, tmp_path / out


def test_simulate_reference_hits_cap(tmp_path):
    code, out = simulate(tmp_path, REFERENCE, "--norm-cap", "1e5")
    assert code == 0
    tr = bio.read_trajectory(out / "trajectory.csv")
    assert tr.stop_reason == "NormCap" and tr.norms[-1] >= 1e5


def test_simulate_step_underflow_exit(tmp_path):
    code, _ = simulate(tmp_path, REFERENCE)
    assert code == 2


def test_simulate_max_steps_exit(tmp_path):
    code, _ = simulate(tmp_path, REFERENCE, "--max-steps", "5")
    assert code == 2


def test_simulate_rejects_negative_spectrum(tmp_path):
    code, _ = simulate(tmp_path, NEGATIVE)
    assert code == 4


@pytest.mark.parametrize("problem", [
    {"kind": "general", "matrix": [[1.0]]},  # no y0
    {"kind": "general", "matrix": [[1.0]], "y0": [1.0], "H": {"kernel": "spiky"}},
    {"problem": REFERENCE, "ctrl": {"norm_cap": 10.0}},
    {"problem": REFERENCE, "ctrl": {"bogus": 1}},
])
def test_simulate_input_errors(tmp_path, problem):
    assert simulate(tmp_path, problem)[0] == 4


def test_missing_and_malformed_files(tmp_path):
    assert cli.main(["simulate", "--config", str(tmp_path / "nope.json")]) == 4
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    assert cli.main(["simulate", "--config", str(bad)]) == 4


def test_usage_error_is_input_error():
    assert cli.main(["simulate"]) == 4
    assert cli.main(["frobnicate"]) == 4


def test_manufactured_trajectory_has_oracle_columns(tmp_path):
    code, out = simulate(tmp_path, MANUFACTURED, "--norm-cap", "1e4")
    assert code == 0
    with (out / "trajectory.csv").open() as fh:
        header = next(csv.reader(fh))
    assert header[-2:] == ["exact1", "oracle_rel_err"]


def test_simulate_then_analyze(tmp_path):
    code, out = simulate(tmp_path, GENERAL)
    assert code == 0
    assert cli.main(["analyze", "--trajectory", str(out / "trajectory.csv"), "--out", str(out)]) == 0
    report = json.loads((out / "report.json").read_text())
    assert report["Lambda_hat"] == 3.0
    assert report["fitted_rate"]["kind"] == "power"
    for name in ("report.txt", "series.csv", "error.png", "lambda.png", "projections.png", "growth.png"):
        assert (out / name).stat().st_size > 0


def test_analyze_schema_mismatch(tmp_path):
    code, out = simulate(tmp_path, REFERENCE, "--norm-cap", "1e5")
    meta = bio.meta_path(out / "trajectory.csv")
    d = json.loads(meta.read_text())
    d["schema"] = "something/else"
    meta.write_text(json.dumps(d))
    assert cli.main(["analyze", "--trajectory", str(out / "trajectory.csv"), "--out", str(out)]) == 4


def test_analyze_dimension_mismatch(tmp_path):
    code, out = simulate(tmp_path, REFERENCE, "--norm-cap", "1e5")
    cfg = write(tmp_path, "general.json", GENERAL)
    assert cli.main(["analyze", "--trajectory", str(out / "trajectory.csv"), "--config", cfg, "--out", str(out)]) == 4


def test_analyze_unaccepted_report_exits_3(tmp_path):
    code, out = simulate(tmp_path, REFERENCE, "--max-steps", "40")
    assert code == 2
    assert cli.main(["analyze", "--trajectory", str(out / "trajectory.csv"), "--out", str(out)]) == 3


def test_report_is_deterministic(tmp_path):
    blobs = []
    for k in range(2):
        code, out = simulate(tmp_path, GENERAL, "--seed", "3", out=f"r{k}")
        cli.main(["analyze", "--trajectory", str(out / "trajectory.csv"), "--out", str(out), "--seed", "3"])
        blobs.append((out / "report.json").read_bytes())
    assert blobs[0] == blobs[1]


def test_output_dir_precedence(tmp_path, monkeypatch):
    monkeypatch.setenv("BLOWUPLAB_OUT", str(tmp_path / "env"))
    assert cli.output_dir(None) == tmp_path / "env"
    assert cli.output_dir(str(tmp_path / "flag")) == tmp_path / "flag"
    monkeypatch.delenv("BLOWUPLAB_OUT")
    monkeypatch.chdir(tmp_path)
    assert cli.output_dir(None).resolve() == (tmp_path / "blowuplab_out").resolve()


def test_env_var_routes_simulate_output(tmp_path, monkeypatch):
    monkeypatch.setenv("BLOWUPLAB_OUT", str(tmp_path / "env"))
    cfg = write(tmp_path, "p.json", REFERENCE)
    assert cli.main(["simulate", "--config", cfg, "--norm-cap", "1e4"]) == 0
    assert (tmp_path / "env" / "trajectory.csv").exists()


def test_run_config_with_problem_reference(tmp_path):
    write(tmp_path, "base.json", REFERENCE)
    cfg = write(tmp_path, "run.json", {"problem": "base.json", "ctrl": {"norm_cap": 1e4, "rel_tol": 1e-9}})
    assert cli.main(["simulate", "--config", cfg, "--out", str(tmp_path / "o")]) == 0
    assert bio.read_trajectory(tmp_path / "o" / "trajectory.csv").ctrl["rel_tol"] == 1e-9


def sweep_spec(values):
    return {"problem": {"kind": "general", "matrix": [[1.0]], "H": {"kernel": "euclidean", "alpha": 1.0},
                        "perturbation": {"family": "power", "params": {"M": 1.0, "delta": 0.5}}, "y0": [1.0]},
            "parameter": "perturbation.params.delta", "values": values,
            "ctrl": {"rel_tol": 1e-13, "norm_cap": 1e6}}


def test_sweep_power_grid(tmp_path):
    cfg = write(tmp_path, "sweep.json", sweep_spec([0.25, 0.5, 1.0]))
    assert cli.main(["sweep", "--config", cfg, "--out", str(tmp_path / "s"), "--jobs", "2"]) == 0
    rows = json.loads((tmp_path / "s" / "summary.json").read_text())["rows"]
    for r in rows:
        assert r["ok"] and r["fitted_kind"] == "power"
        assert abs(r["fitted_exponent"] - r["value"]) <= 0.15 * r["value"]
    assert (tmp_path / "s" / "summary.csv").exists()
    assert (tmp_path / "s" / "row_002" / "report.json").exists()


def test_sweep_log_predictions(tmp_path):
    spec = sweep_spec([2.5, 3.0, 4.0])
    spec["problem"]["perturbation"] = {"family": "log", "params": {"M": 1.0, "p": 3.0}}
    spec["problem"]["y0"] = [3.0]
    spec["parameter"] = "perturbation.params.p"
    spec["ctrl"] = {"norm_cap": 3e6}
    cfg = write(tmp_path, "sweep.json", spec)
    cli.main(["sweep", "--config", cfg, "--out", str(tmp_path / "s")])
    rows = json.loads((tmp_path / "s" / "summary.json").read_text())["rows"]
    for r in rows:
        assert r["predicted_kind"] == "log"
        assert r["predicted_exponent"] == pytest.approx(r["value"] - 2.0)


def test_sweep_empty_grid(tmp_path):
    assert cli.main(["sweep", "--config", write(tmp_path, "e.json", sweep_spec([])), "--out", str(tmp_path)]) == 4


def test_sweep_partial_and_total_failure(tmp_path):
    spec = sweep_spec([[[1.0]], [[-1.0]]])
    spec["parameter"] = "matrix"
    assert cli.main(["sweep", "--config", write(tmp_path, "a.json", spec), "--out", str(tmp_path / "a")]) == 0
    rows = json.loads((tmp_path / "a" / "summary.json").read_text())["rows"]
    assert rows[0]["ok"] and not rows[1]["ok"] and "NonPositiveSpectrum" in rows[1]["error"]
    spec["values"] = [[[-1.0]], [[-2.0]]]
    assert cli.main(["sweep", "--config", write(tmp_path, "b.json", spec), "--out", str(tmp_path / "b")]) == 3


def test_set_path():
    d = {"a": {"b": 1}}
    cli.set_path(d, "a.c.d", 5)
    assert d == {"a": {"b": 1, "c": {"d": 5}}}


def test_verify_command(tmp_path, capsys):
    assert cli.main(["verify", "--out", str(tmp_path)]) == 0
    lines = capsys.readouterr().out.strip().splitlines()
    assert len(lines) == 9 and all(line.startswith("PASS") for line in lines)
    assert len(json.loads((tmp_path / "verify.json").read_text())["checks"]) == 9


def test_module_entry_point():
    res = subprocess.run([sys.executable, "-m", "blowuplab", "--version"], capture_output=True, text=True)
    assert res.returncode == 0 and "blowuplab" in res.stdout


def test_trajectory_round_trip_is_exact(tmp_path):
    code, out = simulate(tmp_path, GENERAL, "--norm-cap", "1e5")
    a = bio.read_trajectory(out / "trajectory.csv")
    bio.write_trajectory(tmp_path / "copy.csv", a)
    b = bio.read_trajectory(tmp_path / "copy.csv")
    np.testing.assert_array_equal(a.states, b.states)
    np.testing.assert_array_equal(a.t_lo, b.t_lo)
    assert a.meta() == b.meta()
