import pytest
import yaml

from epidemic_front.coefficients import DriftFamily
from epidemic_front.coefficients import KernelFamily
from epidemic_front.coefficients import RateFamily
from epidemic_front.epidemic import Mode
from epidemic_front.scenario import ScenarioFile
from epidemic_front.scenario import dump_scenario
from epidemic_front.scenario import load_scenario
from epidemic_front.utils import SCENARIO_DIR
from epidemic_front.utils import ScenarioError


def test_from_dict(scenario_dict):
    scenario = ScenarioFile.from_dict(scenario_dict)
    assert scenario.kernel.family == KernelFamily.TAPERED_UNIFORM
    assert scenario.kernel.taper == 0.05
    assert scenario.coefficients.rate.family == RateFamily.AFFINE
    assert scenario.coefficients.rate.g1 == 20.0
    assert scenario.coefficients.drift.family == DriftFamily.CONSTANT
    assert scenario.initial.x0 == 0.3
    assert scenario.run.n == 16
    assert scenario.run.horizon == 0.2
    assert scenario.run.mode == Mode.TRUE
    assert scenario.output is None


def test_dump_and_load(tmp_path, scenario_dict):
    scenario = ScenarioFile.from_dict(scenario_dict)
    path = tmp_path / "nested" / "copy.yaml"
    text = dump_scenario(scenario, path)
    assert path.read_text() == text
    assert load_scenario(str(path)) == scenario


def test_load_keeps_source(scenario_path_str):
    scenario = load_scenario(scenario_path_str)
    assert scenario.source == scenario_path_str
    assert scenario.output.directory.endswith("out")


def test_constant_rate_uses_g(scenario_dict):
    scenario_dict["rate"] = {"family": "constant", "g": 2.5}
    rate = ScenarioFile.from_dict(scenario_dict).coefficients.rate
    assert rate.g0 == 2.5
    assert rate.g1 == 0.0


def test_yaml_boolean_mode(scenario_dict):
    text = yaml.safe_dump(scenario_dict).replace("mode: 'true'", "mode: true")
    content = yaml.safe_load(text)
    assert content["run"]["mode"] is True
    assert ScenarioFile.from_dict(content).run.mode == Mode.TRUE


def test_barnes_mode(scenario_dict):
    scenario_dict["run"].update(mode="barnes-bar", u=1.5)
    run = ScenarioFile.from_dict(scenario_dict).run
    assert run.mode == Mode.BARNES_BAR
    assert run.u == 1.5
    assert run.kappa == 1.0


def test_artificial_mode_with_tagged(scenario_dict):
    scenario_dict["run"].update(mode="artificial", tagged=2)
    assert ScenarioFile.from_dict(scenario_dict).run.tagged == 2


def _drop(section, key):
    def change(content):
        del content[section][key]

    return change


def _set(section, key, value):
    def change(content):
        content[section][key] = value

    return change


def _drop_section(section):
    def change(content):
        del content[section]

    return change


# change, expected message fragment
ERROR_TESTS = (
    (_drop_section("kernel"), "missing required section 'kernel'"),
    (_set("run", "extra", 1), "unknown keys in run: extra"),
    (_set("kernel", "shape", 2.0), "unknown keys in kernel: shape"),
    (_set("kernel", "family", "gamma"), "kernel.family must be one of"),
    (_drop("kernel", "taper"), "kernel.taper is required"),
    (_set("diffusion", "c", "one"), "diffusion.c must be a decimal number"),
    (_set("diffusion", "c", True), "diffusion.c must be a decimal number"),
    (_set("run", "n", 16.0), "run.n must be an integer"),
    (_drop("run", "seed"), "run.seed is required"),
    (_set("run", "mode", "sideways"), "run.mode must be one of"),
    (_set("run", "mode", "artificial"), "run.tagged is required"),
    (_set("output", "format", "parquet"), "output.format must be one of"),
)


@pytest.mark.parametrize(("change", "message"), ERROR_TESTS)
def test_from_dict_errors(scenario_dict, change, message):
    scenario_dict["output"] = {"format": "csv"}
    change(scenario_dict)
    with pytest.raises(ScenarioError) as excinfo:
        ScenarioFile.from_dict(scenario_dict, source="bad.yaml")
    assert message in str(excinfo.value)
    assert str(excinfo.value).startswith("bad.yaml: ")


def test_unknown_top_level_section(scenario_dict):
    scenario_dict["metrics"] = {}
    with pytest.raises(ScenarioError):
        ScenarioFile.from_dict(scenario_dict)


def test_section_must_be_mapping(scenario_dict):
    scenario_dict["rate"] = [1, 2]
    with pytest.raises(ScenarioError):
        ScenarioFile.from_dict(scenario_dict)


@pytest.mark.parametrize(
    "name", ["default.yaml", "two_wave.yaml", "barnes.yaml", "lamperti.yaml"]
)
def test_bundled_scenarios_are_valid(name):
    scenario = load_scenario(str(SCENARIO_DIR / name))
    config = scenario.to_run_config()
    assert config.check().ok, str(config.check())


def test_to_run_config(scenario_dict):
    scenario = ScenarioFile.from_dict(scenario_dict)
    config = scenario.to_run_config(seed=99, threads=3, record_paths=True)
    assert config.seed == 99
    assert config.threads == 3
    assert config.record_paths
    assert config.steps == 20
    assert scenario.to_run_config().seed == 7


def test_output_directory(scenario_dict):
    assert ScenarioFile.from_dict(scenario_dict).output_directory() is None
    scenario_dict["output"] = {"directory": "results"}
    scenario = ScenarioFile.from_dict(scenario_dict)
    assert scenario.output_directory() == "results"
    assert scenario.output_directory("elsewhere") == "elsewhere"
