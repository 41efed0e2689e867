import json
import subprocess
import sys

import pytest

from nuedkit.cli import CONFIG_ENV, main


@pytest.fixture(autouse=True)
def _clean_env(monkeypatch):
    monkeypatch.delenv(CONFIG_ENV, raising=False)
    monkeypatch.delenv("SOURCE_DATE_EPOCH", raising=False)


def _run(argv, capsys):
    code = main(argv)
    out = capsys.readouterr()
    return code, out.out, out.err


def _payload(path):
    return json.loads(path.read_text())["payload"]


def test_simulate_sec42(tmp_path, capsys):
    out = tmp_path / "traj.csv"
    code, _, _ = _run(["simulate", "--builtin", "sec42", "--x0", "1,1,1", "--tf", "20", "--sample-step", "1",
                       "-o", str(out)], capsys)
    assert code == 0
    lines = out.read_text().splitlines()
    assert lines[0] == "t,x1,x2,x3" and len(lines) == 22
    side = json.loads((tmp_path / "traj.csv.manifest.json").read_text())
    assert side["payload"]["status"] == "Completed"
    assert side["manifest"]["command"] == "simulate" and len(side["manifest"]["input_hash"]) == 64


def test_simulate_blowup_exit_1(tmp_path, capsys):
    sysf = tmp_path / "cube.json"
    sysf.write_text(json.dumps({"kind": "poly_map", "dimension": 1, "coordinates": [[
        {"coefficient": -1, "state_exponents": [1]}, {"coefficient": 1, "state_exponents": [3]}]]}))
    code, _, _ = _run(["simulate", "--system", str(sysf), "--x0", "2", "--tf", "1", "-o", str(tmp_path / "b.csv")],
                      capsys)
    assert code == 1
    assert _payload(tmp_path / "b.csv.manifest.json")["status"] == "Blowup"


def test_determinism_byte_identical(tmp_path, capsys, monkeypatch):
    monkeypatch.setenv("SOURCE_DATE_EPOCH", "1700000000")
    outs = []
    for k in range(2):
        p = tmp_path / f"r{k}.json"
        assert _run(["nued-fit", "--builtin", "diag", "--param", "values=-1", "--horizon", "10", "-o", str(p)],
                    capsys)[0] == 0
        outs.append(p.read_bytes())
    assert outs[0] == outs[1]
    data = json.loads(outs[0])
    assert data["manifest"]["timestamp"] == "2023-11-14T22:13:20Z"
    assert data["payload"]["result"]["status"] == "certificate"


def test_csv_determinism(tmp_path, capsys):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    for p in (a, b):
        _run(["transition", "--builtin", "example_3_4", "--horizon", "5", "--step", "1", "-o", str(p)], capsys)
    assert a.read_bytes() == b.read_bytes()
    assert a.read_text().splitlines()[0] == "t,s,norm"


def test_transition_then_fit_grid(tmp_path, capsys):
    g = tmp_path / "g.csv"
    _run(["transition", "--builtin", "diag", "--param", "values=-1", "--horizon", "20", "-o", str(g)], capsys)
    out = tmp_path / "fit.json"
    code, _, _ = _run(["nued-fit", "--grid", str(g), "-o", str(out)], capsys)
    assert code == 0
    res = _payload(out)["result"]
    assert res["alpha"] >= 0.95 and res["eps"] <= 0.05


def test_nued_fit_infeasible_exit_1(tmp_path, capsys):
    out = tmp_path / "fit.json"
    code, _, _ = _run(["nued-fit", "--builtin", "example_3_4", "--param", "lambda0=-2", "--param", "a=-1",
                       "-o", str(out)], capsys)
    assert code == 1
    res = _payload(out)["result"]
    assert res["status"] == "infeasible"
    assert res["lower_bound_witness"]["eps_lower"] == 2.0


def test_spectrum(tmp_path, capsys):
    out = tmp_path / "sp.json"
    code, _, _ = _run(["spectrum", "--builtin", "diag", "--param", "values=-2,-1", "--horizon", "20",
                       "--lam-min", "-4", "--lam-max", "1", "-o", str(out)], capsys)
    assert code == 0
    ivs = _payload(out)["spectrum"]["intervals"]
    assert len(ivs) == 2


def test_invert_and_nilpotency(tmp_path, capsys):
    out = tmp_path / "inv.json"
    assert _run(["invert", "--builtin", "sec42", "-o", str(out)], capsys)[0] == 0
    comp = _payload(out)["composition"]
    assert comp["F_of_G_is_identity"] and comp["G_of_F_is_identity"]
    assert _run(["nilpotency", "--builtin", "sec42", "-o", str(out)], capsys)[0] == 0
    assert _payload(out)["index"] == 3
    assert _run(["invert", "--builtin", "noninjective_demo", "-o", str(out)], capsys)[0] == 1


def test_injectivity_all(tmp_path, capsys):
    out = tmp_path / "inj.json"
    code, _, _ = _run(["injectivity", "--family", "example_3_2", "--notion", "all", "--tau-max", "2",
                       "--horizon", "10", "--pairs", "20", "-o", str(out)], capsys)
    assert code == 1
    p = _payload(out)
    assert p["verdicts"]["partial"]["outcome"] == "Falsified"
    assert p["verdicts"]["partial"]["witness_verified"] is True
    assert p["verdicts"]["pseudo_partial"]["outcome"] == "Holds"
    assert p["implication_audit"]["consistent"]


def test_check_bnnmyc(tmp_path, capsys):
    out = tmp_path / "h.json"
    code, _, err = _run(["check-bnnmyc", "--builtin", "sec42", "--horizon", "20", "--g3-horizon", "10",
                         "-o", str(out)], capsys)
    assert code == 0
    assert "overall  pass" in err
    assert _payload(out)["checks"]["G1"]["status"] == "evidence_only"


def test_reproduce_out_dir(tmp_path, capsys):
    code, _, err = _run(["reproduce", "--example", "3.2", "--out-dir", str(tmp_path)], capsys)
    assert code == 0 and "PASS" in err
    assert _payload(tmp_path / "example_3_2.json")["passed"]
    assert (tmp_path / "example_3_2.txt").read_text().startswith("example 3.2: PASS")


@pytest.mark.parametrize("argv", [
    ["frobnicate"],
    ["simulate", "--builtin", "sec42"],
    ["simulate", "--system", "/nonexistent/sys.json", "--x0", "1", "--tf", "1"],
    ["simulate", "--builtin", "sec42", "--x0", "1,2", "--tf", "1"],
    ["nued-fit", "--builtin", "diag", "--param", "oops"],
    ["reproduce"],
])
def test_usage_errors_exit_2(argv, capsys):
    code, _, _ = _run(argv, capsys)
    assert code == 2


def test_bad_system_file_message(tmp_path, capsys):
    f = tmp_path / "bad.json"
    f.write_text(json.dumps({"kind": "poly_map", "dimension": 1,
                             "coordinates": [[{"coefficient": "0.25", "state_exponents": [1]}]]}))
    code, _, err = _run(["nilpotency", "--system", str(f)], capsys)
    assert code == 2
    assert "$.coordinates[0][0].coefficient" in err and "1/4" in err


def test_config_file_and_env(tmp_path, capsys, monkeypatch):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"seed": 3, "commands": {"simulate": {"x0": "1", "tf": 2, "builtin": "sec42"}}}))
    out = tmp_path / "t.csv"
    code, _, _ = _run(["--config", str(cfg), "simulate", "--x0", "1,0,0", "-o", str(out)], capsys)
    assert code == 0
    man = json.loads((tmp_path / "t.csv.manifest.json").read_text())["manifest"]
    assert man["seed"] == 3 and man["config"]["tf"] == 2.0 and man["config"]["x0"] == "1,0,0"
    monkeypatch.setenv(CONFIG_ENV, str(cfg))
    assert _run(["simulate", "-o", str(out)], capsys)[0] == 2  # x0 "1" has the wrong dimension
    cfg.write_text(json.dumps({"no_such_option": 1}))
    assert _run(["simulate", "--builtin", "sec42", "--x0", "1,0,0", "--tf", "1", "-o", str(out)], capsys)[0] == 2


def test_module_entry_point(tmp_path):
    out = tmp_path / "n.json"
    proc = subprocess.run([sys.executable, "-m", "nuedkit.cli", "nilpotency", "--builtin", "sec42", "-o", str(out)],
                          capture_output=True, text=True)
    assert proc.returncode == 0, proc.stderr
    assert _payload(out)["nilpotent"] is True
