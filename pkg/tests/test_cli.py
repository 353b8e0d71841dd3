import csv
import json

import pytest

from trk.cli import main

TWO_RUNS_CSV = "t,p,q\n0,-1,-1\n1,1,-1\n2,1,1\n3,1,1\n4,-1,1\n5,-1,1\n6,-1,-1\n"

SMALL_SCENARIO = {
    "description": "1D integrator visiting [2, 3] within [0, 4].",
    "system": {"A": [[1.0]], "B": [[1.0]], "state_box": [[-10, 10]], "input_bound": 1.0, "x0": [0.0]},
    "predicates": [
        {"name": "x_ge_2", "coeffs": [1.0], "offset": -2.0},
        {"name": "x_le_3", "coeffs": [-1.0], "offset": 3.0},
    ],
    "formula": "F[0,4](x_ge_2 & x_le_3)",
    "horizon": 7,
    "objective": "theta",
}


def values(out):
    return dict(line.split(": ", 1) for line in out.strip().splitlines() if ": " in line)


@pytest.fixture
def two_runs(tmp_path):
    p = tmp_path / "two_runs.csv"
    p.write_text(TWO_RUNS_CSV)
    return str(p)


@pytest.fixture
def small_result(tmp_path, capsys):
    scen = tmp_path / "small.json"
    scen.write_text(json.dumps(SMALL_SCENARIO))
    out_dir = tmp_path / "res"
    assert main(["synth", str(scen), "--out-dir", str(out_dir)]) == 0
    capsys.readouterr()
    return out_dir


def test_monitor_example(two_runs, capsys):
    assert main(["monitor", two_runs, "p | q", "--t", "3"]) == 0
    v = values(capsys.readouterr().out)
    assert (v["char"], v["theta"], v["theta_left"], v["theta_right"]) == ("1", "1", "2", "2")


def test_monitor_negation(two_runs, capsys):
    assert main(["monitor", two_runs, "!(p | q)", "--t", "3"]) == 2
    v = values(capsys.readouterr().out)
    assert (v["char"], v["theta"], v["theta_left"], v["theta_right"]) == ("-1", "-1", "-2", "-2")


def test_monitor_boundary(tmp_path, capsys):
    p = tmp_path / "true.csv"
    p.write_text("t,p\n" + "".join(f"{t},1\n" for t in range(5)))
    assert main(["monitor", str(p), "p"]) == 0
    assert values(capsys.readouterr().out)["theta"] == "0"


def test_monitor_state_signal(tmp_path, capsys):
    preds = tmp_path / "p.json"
    preds.write_text(json.dumps(SMALL_SCENARIO))
    sig = tmp_path / "x.csv"
    sig.write_text("t,x1\n0,0\n1,1\n2,2\n3,2.5\n4,3\n5,4\n")
    assert main(["monitor", str(sig), "F[0,3] x_ge_2", "--predicates", str(preds)]) == 0
    assert values(capsys.readouterr().out)["char"] == "1"


@pytest.mark.parametrize(
    "formula, content",
    [
        ("p &", TWO_RUNS_CSV),
        ("F[0,9] p", TWO_RUNS_CSV),
        ("p", "t,p\n0,0.5\n"),
        ("zzz", TWO_RUNS_CSV),
        ("p", ""),
    ],
)
def test_monitor_errors(tmp_path, formula, content, capsys):
    f = tmp_path / "s.csv"
    f.write_text(content)
    assert main(["monitor", str(f), formula]) == 1
    assert "error" in capsys.readouterr().err


def test_monitor_missing_file(capsys):
    assert main(["monitor", "/nonexistent.csv", "p"]) == 1


def test_synth_writes_results(small_result):
    for name in ("trajectory.csv", "summary.json", "plot_data.csv", "scenario.json", "model.lp"):
        assert (small_result / name).exists()
    summary = json.loads((small_result / "summary.json").read_text())
    assert summary["solver_status"] == "optimal" and summary["objective_consistent"] and summary["char_holds"]


def test_synth_prints_summary(tmp_path, capsys):
    scen = tmp_path / "small.json"
    scen.write_text(json.dumps(SMALL_SCENARIO))
    assert main(["synth", str(scen), "--out-dir", str(tmp_path / "o"), "--objective", "left"]) == 0
    out = capsys.readouterr().out
    assert "objective (theta_left):" in out and "cross_eval: theta=" in out
    assert json.loads((tmp_path / "o" / "summary.json").read_text())["objective_kind"] == "theta_left"


def test_synth_infeasible(tmp_path):
    scen = tmp_path / "frozen.json"
    cfg = json.loads(json.dumps(SMALL_SCENARIO))
    cfg["system"]["input_bound"] = 0.0
    scen.write_text(json.dumps(cfg))
    assert main(["synth", str(scen), "--out-dir", str(tmp_path / "o")]) == 3
    assert json.loads((tmp_path / "o" / "summary.json").read_text())["solver_status"] == "infeasible"


def test_synth_bad_solver(tmp_path, capsys):
    scen = tmp_path / "small.json"
    scen.write_text(json.dumps(SMALL_SCENARIO))
    code = main(["synth", str(scen), "--out-dir", str(tmp_path / "o"), "--solver-cmd", "/nonexistent {model} {solution}"])
    assert code == 1


def test_verify_passes(small_result, capsys):
    assert main(["verify", str(small_result)]) == 0
    out = values(capsys.readouterr().out)
    assert out["char_holds"] == out["shift_theorem"] == out["bound"] == out["objective_consistent"] == "pass"


def test_verify_missing_files(tmp_path, capsys):
    assert main(["verify", str(tmp_path)]) == 1


def test_verify_corrupted_trajectory(small_result, capsys):
    path = small_result / "trajectory.csv"
    rows = list(csv.reader(path.open()))
    # push every state out of the zone: the visit disappears
    for r in rows[1:]:
        r[1] = "-5.0"
    with path.open("w", newline="") as fh:
        csv.writer(fh).writerows(rows)
    assert main(["verify", str(small_result)]) == 2
    out = values(capsys.readouterr().out)
    assert out["char_holds"] == "FAIL" and out["dynamics"] == "FAIL"


def test_verify_zero_radius_degenerate(tmp_path, capsys):
    cfg = dict(SMALL_SCENARIO, formula="x_ge_2 | !x_ge_2", horizon=3)
    scen = tmp_path / "taut.json"
    scen.write_text(json.dumps(cfg))
    assert main(["synth", str(scen), "--out-dir", str(tmp_path / "o")]) == 0
    capsys.readouterr()
    assert main(["verify", str(tmp_path / "o")]) == 0
    assert "radius=0 checked=1" in capsys.readouterr().out
