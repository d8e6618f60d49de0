from __future__ import annotations

import json
import subprocess
import sys

import pytest

from vsnalloc.cli import EXIT_FAIL, EXIT_OK, EXIT_USAGE, fixture_text, main
from vsnalloc.scenario import dump_scenario, load_scenario, one_node_scenario


def run(*argv: str) -> subprocess.CompletedProcess:
    return subprocess.run([sys.executable, "-m", "vsnalloc.cli", *argv], capture_output=True, text=True)


@pytest.fixture
def fixture_file(tmp_path):
    path = tmp_path / "one.json"
    assert main(["gen", "--fixture", "one-node", "--out", str(path)]) == EXIT_OK
    return path


def test_fixture_matches_builder():
    assert fixture_text("one-node") == dump_scenario(one_node_scenario())


def test_solve_fixture(fixture_file, tmp_path):
    out = tmp_path / "sol.json"
    proc = run("solve", "--scenario", str(fixture_file), "--out", str(out))
    assert proc.returncode == EXIT_OK, proc.stderr
    data = json.loads(out.read_text())
    assert data["objective"] == pytest.approx(0.99)
    assert data["status"] == "optimal"
    assert set(data["stats"]) >= {"lp_iterations", "bnb_nodes", "incumbent", "bound", "gap"}


@pytest.mark.parametrize("routing", ["multipath", "singlepath", "static"])
@pytest.mark.parametrize("method", ["exact", "heuristic"])
def test_solve_then_validate_subprocess(tmp_path, routing, method):
    scen = tmp_path / "s.json"
    assert main(["gen", "--seed", "5", "--n-scalar", "4", "--n-multimedia", "4", "--area", "80", "80",
                 "--out", str(scen)]) == EXIT_OK
    sol = tmp_path / "sol.json"
    assert main(["solve", "--scenario", str(scen), "--routing", routing, "--method", method,
                 "--out", str(sol)]) == EXIT_OK
    proc = run("validate", "--scenario", str(scen), "--solution", str(sol))
    assert proc.returncode == EXIT_OK, proc.stdout
    assert proc.stdout.startswith("ok:")


def test_validate_tampered(fixture_file, tmp_path, capsys):
    sol = tmp_path / "sol.json"
    main(["solve", "--scenario", str(fixture_file), "--out", str(sol)])
    data = json.loads(sol.read_text())
    data["values"]["y[0,0,0]"] = 0.0
    sol.write_text(json.dumps(data))
    capsys.readouterr()
    assert main(["validate", "--scenario", str(fixture_file), "--solution", str(sol)]) == EXIT_FAIL
    printed = capsys.readouterr().out
    for tag in ("Eq2[0,0]", "Eq4[0]"):
        assert tag in printed


def test_gen_is_deterministic(tmp_path, capsys):
    main(["gen", "--seed", "3"])
    first = capsys.readouterr().out
    main(["gen", "--seed", "3"])
    assert capsys.readouterr().out == first
    path = tmp_path / "s.json"
    path.write_text(first)
    assert len(load_scenario(path).nodes) == 12


def test_gen_power_and_lifetime(capsys):
    main(["gen", "--p-max-dbm", "-10", "--lifetime-days", "2"])
    data = json.loads(capsys.readouterr().out)
    assert data["radio"]["p_max_mw"] == pytest.approx(0.1)
    assert data["lifetime_s"] == 2 * 86400.0


@pytest.mark.parametrize("argv", [
    [], ["solve"], ["frobnicate"], ["solve", "--scenario", "x.json", "--routing", "zigzag"],
    ["gen", "--sinks-scalar", "0", "--sinks-mm", "0"],
])
def test_usage_errors(argv):
    assert main(argv) == EXIT_USAGE


def test_missing_file(tmp_path, capsys):
    assert main(["solve", "--scenario", str(tmp_path / "nope.json")]) == EXIT_USAGE
    assert "no such file" in capsys.readouterr().err


def test_malformed_scenario_has_line(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text('{\n "area": [1,\n}\n')
    assert main(["solve", "--scenario", str(bad)]) == EXIT_USAGE
    assert "line 3" in capsys.readouterr().err


def test_unknown_field_diagnostic(fixture_file, tmp_path, capsys):
    data = json.loads(fixture_file.read_text())
    data["nodes"][0]["colour"] = "red"
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps(data))
    assert main(["solve", "--scenario", str(bad)]) == EXIT_USAGE
    assert "nodes[0]" in capsys.readouterr().err


def test_malformed_solution(fixture_file, tmp_path):
    bad = tmp_path / "sol.json"
    bad.write_text('{"status": "optimal", "objective": 1, "values": {"q[1]": 1}}')
    assert main(["validate", "--scenario", str(fixture_file), "--solution", str(bad)]) == EXIT_USAGE


def test_no_solution_exit_code(tmp_path):
    scen = tmp_path / "s.json"
    main(["gen", "--seed", "0", "--out", str(scen)])
    sol = tmp_path / "sol.json"
    assert main(["solve", "--scenario", str(scen), "--time-limit", "1e-9", "--out", str(sol)]) == EXIT_FAIL
    data = json.loads(sol.read_text())
    assert data["status"] == "no_solution" and data["objective"] is None


def spec_file(tmp_path, **kw):
    spec = {"name": "tiny", "sweep": "routing_mode", "sweep_values": ["multipath", "static"],
            "base": {"n_scalar": 4, "n_multimedia": 4, "area": [80, 80]}, "replications": 2}
    spec.update(kw)
    path = tmp_path / "spec.json"
    path.write_text(json.dumps(spec))
    return path


def test_sweep_byte_identical(tmp_path):
    spec = spec_file(tmp_path)
    for out in ("a", "b"):
        assert main(["sweep", "--spec", str(spec), "--out-dir", str(tmp_path / out)]) == EXIT_OK
    for ext in ("csv", "json"):
        assert (tmp_path / "a" / f"tiny.{ext}").read_bytes() == (tmp_path / "b" / f"tiny.{ext}").read_bytes()
    lines = (tmp_path / "a" / "tiny.csv").read_text().splitlines()
    assert len(lines) == 1 + 2 * 2 * 2


def test_sweep_timing_column(tmp_path):
    spec = spec_file(tmp_path, sweep_values=["static"], replications=1, method="heuristic")
    main(["sweep", "--spec", str(spec), "--out-dir", str(tmp_path), "--timing"])
    rows = json.loads((tmp_path / "tiny.json").read_text())
    assert rows[0]["wall_time_s"] > 0


def test_sweep_bad_spec(tmp_path, capsys):
    assert main(["sweep", "--spec", str(spec_file(tmp_path, sweep="colour")), "--out-dir", str(tmp_path)]) \
        == EXIT_USAGE
    assert "sweep" in capsys.readouterr().err
    bad = tmp_path / "broken.json"
    bad.write_text('{"name": "x",\n "sweep": }')
    assert main(["sweep", "--spec", str(bad), "--out-dir", str(tmp_path)]) == EXIT_USAGE
    assert ":2:" in capsys.readouterr().err
