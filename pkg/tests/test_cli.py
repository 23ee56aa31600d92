import json
import subprocess
import sys

import pytest

from instrument_forge import cli


def run(args, capsys):
    code = cli.main([str(a) for a in args])
    out = capsys.readouterr()
    return code, (json.loads(out.out) if out.out else None), out.err


def test_validate_pass_and_fail(fixtures_dir, capsys):
    code, rep, _ = run(["validate", fixtures_dir / "lueders_z.json"], capsys)
    assert code == 0 and rep["passed"] and rep["command"] == "validate"
    assert rep["inputs_digest"].startswith("sha256:")
    assert {c["name"] for c in rep["checks"]} >= {"unitality", "cp:0", "range:1"}
    code, rep, _ = run(["validate", fixtures_dir / "nonunital.json"], capsys)
    assert code == 1 and not rep["passed"]
    unit = next(c for c in rep["checks"] if c["name"] == "unitality")
    assert unit["residual"] == 0.21 and not unit["passed"]


def test_usage_and_io_errors(fixtures_dir, tmp_path, capsys):
    assert run(["validate", tmp_path / "nope.json"], capsys)[0] == 2
    bad = tmp_path / "bad.json"
    bad.write_text("{")
    code, _, err = run(["validate", bad], capsys)
    assert code == 2 and "bad.json:1:" in err
    assert run(["frobnicate"], capsys)[0] == 2
    assert run(["posterior", fixtures_dir / "lueders_z.json"], capsys)[0] == 2


def test_tolerance_precedence(fixtures_dir, capsys, monkeypatch):
    spec = fixtures_dir / "nonunital.json"
    monkeypatch.setenv(cli.TOL_ENV, "0.5")
    assert run(["validate", spec], capsys)[0] == 0
    assert run(["validate", spec, "--tol", "0.1"], capsys)[0] == 1
    monkeypatch.setenv(cli.TOL_ENV, "soon")
    assert run(["validate", spec], capsys)[0] == 2


def test_dilate_writes_process(fixtures_dir, tmp_path, capsys):
    out = tmp_path / "proc.json"
    code, rep, _ = run(["dilate", fixtures_dir / "lueders_z.json", "--process-out", out], capsys)
    assert code == 0 and rep["artifacts"] == [str(out)]
    assert rep["data"]["sigma_rank"] == 1
    assert json.loads(out.read_text())["ancilla_dim"] == rep["data"]["ancilla_dim"]
    code, rep, _ = run(["dilate", fixtures_dir / "diagonal_instrument.json"], capsys)
    assert code == 0 and rep["data"]["canonical_extension"] and rep["notes"]
    assert run(["dilate", fixtures_dir / "nonunital.json"], capsys)[0] == 1


def test_posterior_report(fixtures_dir, capsys):
    code, rep, _ = run(["posterior", fixtures_dir / "lueders_z.json", fixtures_dir / "plus_state.json"], capsys)
    assert code == 0
    assert rep["data"]["weights"] == {"0": 0.5, "1": 0.5}
    code, rep, _ = run(["posterior", fixtures_dir / "lueders_z.json", fixtures_dir / "zero_state.json"], capsys)
    assert code == 0
    assert rep["data"]["posteriors"]["1"] == "indefinite" and rep["data"]["indefinite"] == ["1"]


def test_compose_report(fixtures_dir, capsys):
    code, rep, _ = run(["compose", fixtures_dir / "lueders_z.json", fixtures_dir / "lueders_x.json",
                        fixtures_dir / "zero_state.json"], capsys)
    assert code == 0
    assert rep["data"]["joint"] == [[0.5, 0.0], [0.5, 0.0]]
    assert rep["data"]["second_marginal"] == {"+": 0.5, "-": 0.5}


def test_localnet_commands(fixtures_dir, capsys):
    net = fixtures_dir / "net_L3.json"
    code, rep, _ = run(["localnet", net, fixtures_dir / "site0_lueders_z.json",
                        "--region", "0..0", "--collar", "0..1"], capsys)
    assert code == 0
    assert all(c["residual"] < 1e-9 for c in rep["checks"])
    assert {"locality", "range", "intertwining", "restriction"} <= {c["name"] for c in rep["checks"]}
    code, rep, _ = run(["localnet", net, fixtures_dir / "vn_model.json", "--region", "0..0"], capsys)
    assert code == 0 and all(c["residual"] < 1e-9 for c in rep["checks"])
    for extra in (["--region", "0..0", "--collar", "0..5"], ["--region", "0..0", "--collar", "0..0"],
                  ["--region", "0..0"], ["--region", "x", "--collar", "0..1"]):
        assert run(["localnet", net, fixtures_dir / "site0_lueders_z.json", *extra], capsys)[0] == 2


def test_reports_are_deterministic(fixtures_dir, tmp_path):
    outs = []
    for k in range(2):
        path = tmp_path / f"r{k}.json"
        assert cli.main(["localnet", str(fixtures_dir / "net_L3.json"), str(fixtures_dir / "site0_lueders_z.json"),
                         "--region", "0..0", "--collar", "0..1", "--out", str(path)]) == 0
        outs.append(path.read_bytes())
    assert outs[0] == outs[1]


def test_console_entry_point(fixtures_dir):
    proc = subprocess.run([sys.executable, "-m", "instrument_forge.cli", "validate",
                           str(fixtures_dir / "trivial.json")], capture_output=True, text=True)
    assert proc.returncode == 0
    assert json.loads(proc.stdout)["passed"] is True
