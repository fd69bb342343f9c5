import json

import pytest
import yaml

from epidemic_front.coefficients import DiffusionFamily
from epidemic_front.lamperti_check import LAMPERTI_SCENARIO
from epidemic_front.lamperti_check import constant_diffusion
from epidemic_front.lamperti_check import lamperti_checks
from epidemic_front.lamperti_check import load_lamperti_config
from epidemic_front.lamperti_check import main
from epidemic_front.utils import ScenarioError


def test_load_lamperti_config():
    config = load_lamperti_config(str(LAMPERTI_SCENARIO), seed=3, threads=1)
    assert config.seed == 3
    assert config.kernel.smooth


def test_load_lamperti_config_rejects_uniform_kernel(tmp_path, scenario_dict):
    scenario_dict["kernel"] = {"family": "uniform", "dbar": 0.5}
    path = tmp_path / "uniform.yaml"
    path.write_text(yaml.safe_dump(scenario_dict))
    with pytest.raises(ScenarioError) as excinfo:
        load_lamperti_config(str(path), None, 1)
    assert "not absolutely continuous" in str(excinfo.value)


def test_constant_diffusion():
    config = load_lamperti_config(str(LAMPERTI_SCENARIO), None, 1)
    frozen = constant_diffusion(config)
    assert frozen.coefficients.diffusion.family == DiffusionFamily.CONSTANT
    assert frozen.coefficients.diffusion.c == config.coefficients.diffusion.c
    assert frozen.coefficients.rate == config.coefficients.rate


def test_lamperti_checks(scenario_path_str):
    config = load_lamperti_config(scenario_path_str, None, 1)
    results = lamperti_checks(
        config,
        paths=100,
        rescaling_paths=20,
        dt_ladder=(0.02, 0.01),
        eps_ladder=(0.1,),
    )
    assert [result.name for result in results] == [
        "pathwise",
        "distribution_identity",
        "local_time_rescaling",
    ]
    assert results[0].passed
    assert "growth_bound" in results[2].details


def test_lamperti_check_main_report(scenario_path_str, tmp_path):
    report = tmp_path / "lamperti.json"
    status_code = main(
        [
            scenario_path_str,
            "--paths",
            "100",
            "--rescaling-paths",
            "20",
            "--dt-ladder",
            "0.02",
            "0.01",
            "--eps-ladder",
            "0.1",
            "--report",
            str(report),
        ]
    )
    content = json.loads(report.read_text())
    assert len(content["checks"]) == 3
    assert status_code == (0 if content["passed"] else 1)


# scenario change, expected status code
TESTS = (
    (lambda content: content.update(kernel={"family": "uniform", "dbar": 0.5}), 2),
    (lambda content: content["diffusion"].update(c=-1.0), 2),
    (lambda content: content.pop("run"), 2),
)


@pytest.mark.parametrize(("change", "expected_status_code"), TESTS)
def test_lamperti_check_rejects(change, expected_status_code, tmp_path, scenario_dict):
    change(scenario_dict)
    path = tmp_path / "scenario.yaml"
    path.write_text(yaml.safe_dump(scenario_dict))
    assert main([str(path)]) == expected_status_code
