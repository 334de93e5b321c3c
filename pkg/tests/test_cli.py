import json
import os

import pytest

from anchorcov import cli
from anchorcov.errors import DegenerateTriangle, StepError
from anchorcov.fixtures import THIRTEEN_AGENTS

TARGETS = [[3.0, 3.0], [4.0, 6.0], [6.0, 4.0], [7.0, 7.0], [2.0, 8.0]]


def write(tmp_path, doc, name="scenario.json"):
    path = tmp_path / name
    path.write_text(json.dumps(doc) if not isinstance(doc, str) else doc)
    return str(path)


@pytest.fixture
def thirteen(tmp_path):
    doc = {"agents": [{"id": i, "x": x, "y": y} for i, (x, y) in THIRTEEN_AGENTS.items()],
           "targets": TARGETS, "M": 5, "max_steps": 150}
    return write(tmp_path, doc)


def test_structure_thirteen(thirteen, tmp_path):
    out = tmp_path / "out"
    assert cli.main(["structure", thirteen, "--out", str(out)]) == 0
    dot = (out / "structure.dot").read_text()
    assert dot.count("shape=box") + dot.count("shape=circle") == 13
    doc = json.loads((out / "structure.json").read_text())
    assert len(doc["layers"]) == 3 and doc["layers"][1] == [11, 10, 6, 5]
    assert (out / "validation.txt").read_text() == "valid\n"
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["outputs"] == ["structure.dot", "structure.json", "validation.txt"]


def test_structure_minimal(tmp_path):
    doc = {"agents": [{"id": 1, "x": 0, "y": 0}, {"id": 2, "x": 4, "y": 0},
                      {"id": 3, "x": 0, "y": 4}, {"id": 4, "x": 1, "y": 1}], "targets": []}
    out = tmp_path / "out"
    assert cli.main(["structure", write(tmp_path, doc), "--out", str(out)]) == 0
    dot = (out / "structure.dot").read_text()
    assert dot.count("shape=box") == 4 and "->" not in dot


def test_malformed_json_reports_position(tmp_path, capsys):
    path = write(tmp_path, '{"agents": [\n  {"id": 1,, }]}')
    assert cli.main(["structure", path, "--out", str(tmp_path / "o")]) == 2
    err = capsys.readouterr().err
    assert "line 2" in err and "column" in err


@pytest.mark.parametrize("doc", [
    {"agents": "nope", "targets": []},
    {"agents": [], "targets": [], "colour": 1},
    {"targets": []},
    {"agents": [{"id": 1, "x": "a", "y": 0}], "targets": []},
])
def test_invalid_fields_exit_2(tmp_path, doc):
    assert cli.main(["structure", write(tmp_path, doc), "--out", str(tmp_path / "o")]) == 2


def test_missing_file_exit_2(tmp_path):
    assert cli.main(["plan", str(tmp_path / "none.json"), "--out", str(tmp_path / "o")]) == 2


def test_geometry_error_exit_3(tmp_path):
    collinear = {"agents": [{"id": i, "x": float(i), "y": 0.0} for i in range(1, 6)],
                 "targets": []}
    assert cli.main(["structure", write(tmp_path, collinear), "--out", str(tmp_path / "o")]) == 3


def test_degenerate_needs_flag(tmp_path):
    doc = {"agents": [{"id": 1, "x": 0, "y": 0}, {"id": 2, "x": 4, "y": 0}, {"id": 3, "x": 0, "y": 4},
                      {"id": 4, "x": 1, "y": 1}, {"id": 5, "x": 2, "y": 0}], "targets": [[1, 0.5]]}
    path = write(tmp_path, doc)
    assert cli.main(["structure", path, "--out", str(tmp_path / "a")]) == 3
    assert cli.main(["structure", path, "--perturb-degenerate", "--out", str(tmp_path / "b")]) == 0


def test_step_error_maps_to_geometry(thirteen, tmp_path, monkeypatch):
    def boom(*a, **k):
        raise StepError(3, 7, DegenerateTriangle("flat"))
    monkeypatch.setattr(cli, "run", boom)
    assert cli.main(["simulate", thirteen, "--out", str(tmp_path / "o")]) == 3


def test_simulate_exports(thirteen, tmp_path):
    out = tmp_path / "out"
    code = cli.main(["simulate", thirteen, "--mode", "aoc", "--eta", "0.05", "--emit-plots",
                     "--dump-policies", "--out", str(out)])
    assert code == 0
    for name in ("plan.json", "trajectory.csv", "trajectory.json", "paths.csv", "errors.csv",
                 "policies.json", "manifest.json"):
        assert (out / name).exists(), name
    traj = json.loads((out / "trajectory.json").read_text())
    assert traj["converged"] and len(traj["gammas"]) == traj["steps"]
    assert all(len(t) == 3 for t in traj["gammas"][0])
    lines = (out / "trajectory.csv").read_text().splitlines()
    assert lines[0] == "t,id,x,y" and len(lines) == 1 + 13 * (traj["steps"] + 1)
    plan = json.loads((out / "plan.json").read_text())
    assert plan["fixed_point_residual"] < 1e-9
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["scenario"]["mode"] == "aoc" and manifest["seed"] == 0


def test_not_converged_exit_4(thirteen, tmp_path):
    out = tmp_path / "out"
    assert cli.main(["simulate", thirteen, "--max-steps", "1", "--out", str(out)]) == 4
    assert (out / "trajectory.json").exists()


def test_analyze_fault_injection(thirteen, tmp_path):
    out = tmp_path / "out"
    assert cli.main(["all", thirteen, "--mode", "aoc", "--out", str(out)]) == 0
    report = json.loads((out / "report.json").read_text())
    assert report["passed"] and report["max_window_norm"] <= 0.95 + 1e-10
    traj = json.loads((out / "trajectory.json").read_text())
    traj["gammas"][0][-1][2] *= 1.5
    bad = write(tmp_path, traj, "bad.json")
    assert cli.main(["analyze", thirteen, "--trajectory", bad, "--out", str(tmp_path / "a")]) == 1
    good = str(out / "trajectory.json")
    assert cli.main(["analyze", thirteen, "--mode", "aoc", "--trajectory", good,
                     "--out", str(tmp_path / "b")]) == 0


def test_manifest_rerun_is_byte_identical(thirteen, tmp_path, monkeypatch):
    monkeypatch.setenv("SOURCE_DATE_EPOCH", "1700000000")
    first = tmp_path / "first"
    assert cli.main(["all", thirteen, "--emit-plots", "--out", str(first)]) == 0
    manifest = str(first / "manifest.json")
    monkeypatch.delenv("SOURCE_DATE_EPOCH")
    for name in ("a", "b"):
        assert cli.main(["all", "--manifest", manifest, "--emit-plots",
                         "--out", str(tmp_path / name)]) == 0
    files = sorted(os.listdir(first))
    assert files == sorted(os.listdir(tmp_path / "a"))
    for f in files:
        ref = (first / f).read_bytes()
        assert (tmp_path / "a" / f).read_bytes() == ref, f
        assert (tmp_path / "b" / f).read_bytes() == ref, f
    created = json.loads((first / "manifest.json").read_text())["created"]
    assert created == "2023-11-14T22:13:20Z"


def test_overrides_land_in_manifest(thirteen, tmp_path):
    out = tmp_path / "out"
    cli.main(["plan", thirteen, "--resolution", "7", "--alpha", "2", "--seed", "9",
              "--out", str(out)])
    m = json.loads((out / "manifest.json").read_text())
    assert m["scenario"]["M"] == 7 and m["scenario"]["alpha"] == 2.0 and m["seed"] == 9
