import copy

import pytest
import yaml

from epidemic_front.coefficients import CoefficientSet
from epidemic_front.coefficients import InitialFamily
from epidemic_front.coefficients import InitialLaw
from epidemic_front.coefficients import KernelFamily
from epidemic_front.coefficients import KernelSpec
from epidemic_front.coefficients import RateFamily
from epidemic_front.coefficients import RateSpec
from epidemic_front.epidemic import RunConfig

SCENARIO = {
    "version": 1,
    "kernel": {"family": "tapered_uniform", "dbar": 0.5, "taper": 0.05},
    "drift": {"family": "constant", "mu": 0.0},
    "diffusion": {"family": "constant", "c": 1.0},
    "rate": {"family": "affine", "g0": 5.0, "g1": 20.0},
    "initial": {"family": "point", "x0": 0.3},
    "run": {
        "n": 16,
        "T": 0.2,
        "dt": 0.01,
        "mode": "true",
        "seed": 7,
        "a0": 0.0,
        "alpha": 0.5,
    },
}

TAPERED = KernelSpec(KernelFamily.TAPERED_UNIFORM, dbar=0.5, taper=0.05)
EPIDEMIC_RATE = RateSpec(RateFamily.AFFINE, g0=5.0, g1=20.0)


@pytest.fixture(scope="function")
def scenario_dict():
    yield copy.deepcopy(SCENARIO)


@pytest.fixture(scope="function")
def scenario_path_str(tmp_path, scenario_dict):
    scenario_dict["output"] = {"directory": str(tmp_path / "out"), "format": "csv"}
    file = tmp_path / "scenario.yaml"
    file.write_text(yaml.safe_dump(scenario_dict))
    yield str(file)


@pytest.fixture(scope="function")
def small_config():
    yield RunConfig(
        n=16,
        horizon=0.2,
        dt=0.01,
        kernel=TAPERED,
        coefficients=CoefficientSet(rate=EPIDEMIC_RATE),
        initial=InitialLaw(InitialFamily.POINT, x0=0.3),
        alpha=0.5,
        seed=7,
    )


@pytest.fixture(scope="function")
def quiet_config(small_config):
    """No infections, no front movement."""
    yield small_config.with_changes(
        alpha=0.0, coefficients=CoefficientSet(rate=RateSpec())
    )
