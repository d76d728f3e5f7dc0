import csv
import json

import pytest

from handoff.cli import main, scatter_svg
from handoff.pareto import ValueProfile

ARM_FLAGS = ["--ma", "ma.json", "--mh", "mh.json", "--att", "att.json", "--dra", "dra.json"]


@pytest.fixture()
def arm_dir(tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)
    assert main(["example", "arm", "--out", "."]) == 0
    return tmp_path


def test_validate_ok(arm_dir, capsys):
    assert main(["validate", "ma.json", "mh.json", "att.json", "dra.json"]) == 0


def test_validate_row_sum_defect(arm_dir, capsys):
    doc = json.loads((arm_dir / "ma.json").read_text())
    doc["transitions"][0][3] = 0.5
    (arm_dir / "bad.json").write_text(json.dumps(doc))
    assert main(["validate", "bad.json"]) == 1
    s, a = doc["transitions"][0][:2]
    assert f"({s}, {a})" in capsys.readouterr().out


def test_validate_missing_file(arm_dir):
    assert main(["validate", "nope.json"]) == 2


def test_synthesize_writes_outputs(arm_dir, capsys):
    assert main(["synthesize", *ARM_FLAGS, "--weights", "0.8,0.2", "--out", "out"]) == 0
    for name in ("bundle.json", "profile.json", "stage1_policy.json", "aec_policies.json", "terminal_costs.json"):
        assert (arm_dir / "out" / name).exists()
    prof = json.loads((arm_dir / "out" / "profile.json").read_text())
    assert set(prof) == {"weights", "lambda", "u1", "u2", "ideal", "nadir"}
    assert json.loads(capsys.readouterr().out) == prof


def test_synthesize_bad_weights(arm_dir):
    assert main(["synthesize", *ARM_FLAGS, "--weights", "0.5,0.4"]) == 2
    assert main(["synthesize", *ARM_FLAGS, "--weights", "abc"]) == 2
    assert main(["synthesize", "--weights", "0.5,0.5"]) == 2  # no inputs


def test_synthesize_invalid_model(arm_dir):
    doc = json.loads((arm_dir / "ma.json").read_text())
    doc["gamma"] = 1.5
    (arm_dir / "ma.json").write_text(json.dumps(doc))
    assert main(["synthesize", *ARM_FLAGS, "--weights", "0.5,0.5"]) == 1


def read_csv(path):
    with open(path) as fh:
        return list(csv.reader(fh))


def test_sweep_grid(arm_dir):
    assert main(["sweep", *ARM_FLAGS, "--grid", "9", "--csv", "s.csv", "--svg", "s.svg"]) == 0
    rows = read_csv(arm_dir / "s.csv")
    assert rows[0] == ["w1", "w2", "lambda1", "lambda2", "u1", "u2"]
    assert len(rows) == 10
    prof = [ValueProfile(float(r[4]), float(r[5])) for r in rows[1:]]
    assert not any(a.dominates(b) for a in prof for b in prof)
    assert (arm_dir / "s.svg").read_text().count("<circle") == 9


def test_sweep_midpoint_and_weights_file(arm_dir, capsys):
    assert main(["sweep", "--example", "arm", "--grid", "1"]) == 0
    out = capsys.readouterr().out.splitlines()
    assert len(out) == 2 and out[1].startswith("0.5,0.5,")
    (arm_dir / "w.txt").write_text("# weights\n0.3,0.7\n\n1,0\n")
    assert main(["sweep", "--example", "arm", "--weights-file", "w.txt", "--csv", "f.csv"]) == 0
    assert [r[:2] for r in read_csv(arm_dir / "f.csv")[1:]] == [["0.3", "0.7"], ["1", "0"]]


def test_sweep_malformed_weights_file(arm_dir):
    (arm_dir / "w.txt").write_text("0.3;0.7\n")
    assert main(["sweep", "--example", "arm", "--weights-file", "w.txt"]) == 2
    assert main(["sweep", "--example", "arm", "--weights-file", "absent.txt"]) == 2
    assert main(["sweep", "--example", "arm", "--grid", "0"]) == 2


def test_outputs_byte_identical(arm_dir):
    for d in ("a", "b"):
        assert main(["synthesize", *ARM_FLAGS, "--weights", "0.6,0.4", "--out", d]) == 0
        assert main(["simulate", "--policy-bundle", f"{d}/bundle.json", "--traces", "50", "--seed", "3",
                     "--horizon", "100", "--out", f"{d}/est.json", "--export-traces", f"{d}/t.jsonl"]) == 0
    for name in ("bundle.json", "profile.json", "est.json", "t.jsonl", "aec_policies.json"):
        assert (arm_dir / "a" / name).read_bytes() == (arm_dir / "b" / name).read_bytes()
    lines = (arm_dir / "a" / "t.jsonl").read_text().splitlines()
    assert len(lines) == 50 and len(json.loads(lines[0])["steps"]) == 100


def test_simulate_bad_bundle(arm_dir):
    assert main(["simulate", "--policy-bundle", "missing.json"]) == 2
    (arm_dir / "x.json").write_text("{")
    assert main(["simulate", "--policy-bundle", "x.json"]) == 2


def test_gridworld_example_and_custom_map(tmp_path):
    assert main(["example", "gridworld", "--out", str(tmp_path / "g")]) == 0
    assert main(["validate", *[str(tmp_path / "g" / f"{k}.json") for k in ("ma", "mh", "att", "dra")]]) == 0
    m = tmp_path / "map.json"
    m.write_text(json.dumps({"terrain": ["PPP", "PPP", "PPP"], "regions": {"R1": [[2, 2]], "R2": [[0, 2]],
                                                                             "R3": [[0, 0]]},
                             "obstacles": [[1, 1]], "start": [2, 0]}))
    assert main(["example", "gridworld", "--map", str(m), "--out", str(tmp_path / "h")]) == 0
    ma = json.loads((tmp_path / "h" / "ma.json").read_text())
    assert len(ma["states"]) == 9
    m.write_text(json.dumps({"terrain": ["PX"]}))
    assert main(["example", "gridworld", "--map", str(m), "--out", str(tmp_path / "i")]) == 2


def test_scatter_svg_deterministic():
    pts = [(0.1, -3.0), (0.2, -4.0)]
    assert scatter_svg(pts) == scatter_svg(pts)
    assert scatter_svg([]).startswith("<svg")
