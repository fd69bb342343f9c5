import csv
import json

import pytest
import yaml

from epidemic_front.sweep_decay import main


def test_sweep_decay(scenario_path_str, tmp_path):
    report = tmp_path / "decay.json"
    status_code = main(
        [
            scenario_path_str,
            "--sizes",
            "4",
            "8",
            "16",
            "32",
            "--replications",
            "4",
            "--bootstrap",
            "20",
            "--report",
            str(report),
        ]
    )
    assert status_code == 0
    with open(tmp_path / "out" / "decay.csv") as f:
        rows = list(csv.reader(f))
    assert rows[0] == ["n", "sup_M2"]
    assert [row[0] for row in rows[1:]] == ["4", "8", "16", "32"]
    content = json.loads(report.read_text())
    assert content["sizes"] == [4, 8, 16, 32]
    assert content["replications"] == 4


def test_sweep_decay_without_epidemic(tmp_path, scenario_dict):
    scenario_dict["run"]["alpha"] = 0.0
    scenario_dict["rate"] = {"family": "constant", "g": 0.0}
    path = tmp_path / "quiet.yaml"
    path.write_text(yaml.safe_dump(scenario_dict))
    report = tmp_path / "decay.json"
    args = [str(path), "--sizes", "2", "4", "8", "16", "--replications", "2"]
    args += ["--output", str(tmp_path / "quiet"), "--report", str(report)]
    assert main(args) == 0
    content = json.loads(report.read_text())
    assert content["degenerate"]
    assert content["slope"] is None


# Input args, expected return value
TESTS = (
    (["--sizes", "8", "16", "32"], 2),
    (["--sizes", "8", "16", "32", "40"], 2),
    (["--sizes", "4", "8", "16", "32", "--replications", "2"], 0),
)


@pytest.mark.parametrize(("input_args", "expected_status_code"), TESTS)
def test_sweep_decay_status(input_args, expected_status_code, scenario_path_str):
    status_code = main([scenario_path_str, "--bootstrap", "10"] + input_args)
    assert status_code == expected_status_code


def test_sweep_decay_missing_scenario(tmp_path):
    assert main([str(tmp_path / "missing.yaml")]) == 2
