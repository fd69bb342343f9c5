"""YAML scenario files: schema checks, typed sections and serialization."""
from dataclasses import dataclass
from dataclasses import field
from pathlib import Path
from typing import Any
from typing import Dict
from typing import Optional
from typing import Set
from typing import Tuple

from yaml import safe_dump

from epidemic_front.coefficients import CoefficientSet
from epidemic_front.coefficients import DiffusionFamily
from epidemic_front.coefficients import DiffusionSpec
from epidemic_front.coefficients import DriftFamily
from epidemic_front.coefficients import DriftSpec
from epidemic_front.coefficients import InitialFamily
from epidemic_front.coefficients import InitialLaw
from epidemic_front.coefficients import KernelFamily
from epidemic_front.coefficients import KernelSpec
from epidemic_front.coefficients import RateFamily
from epidemic_front.coefficients import RateSpec
from epidemic_front.epidemic import Mode
from epidemic_front.epidemic import RunConfig
from epidemic_front.utils import ScenarioError
from epidemic_front.utils import get_scenario_file

SCHEMA_VERSION = 1
SECTIONS = ("kernel", "drift", "diffusion", "rate", "initial", "run")
OPTIONAL_SECTIONS = ("output",)

# per family: scenario key -> catalog field
KERNEL_KEYS: Dict[str, Dict[str, str]] = {
    "uniform": {"dbar": "dbar"},
    "truncated_weibull": {"dbar": "dbar", "shape": "shape", "scale": "scale"},
    "tapered_uniform": {"dbar": "dbar", "taper": "taper"},
}
DRIFT_KEYS: Dict[str, Dict[str, str]] = {
    "constant": {"mu": "mu"},
    "mean_reverting": {"theta": "theta", "m": "m"},
}
DIFFUSION_KEYS: Dict[str, Dict[str, str]] = {
    "constant": {"c": "c"},
    "time_modulated": {"c": "c", "amplitude": "amplitude", "frequency": "frequency"},
    "space_modulated": {
        "c": "c",
        "amplitude": "amplitude",
        "center": "center",
        "width": "width",
    },
}
RATE_KEYS: Dict[str, Dict[str, str]] = {
    "constant": {"g": "g0"},
    "affine": {"g0": "g0", "g1": "g1"},
}
INITIAL_KEYS: Dict[str, Dict[str, str]] = {
    "point": {"x0": "x0"},
    "truncated_gaussian": {"mean": "mean", "stdev": "stdev"},
}
RUN_REQUIRED = ("n", "T", "dt", "mode", "seed")
RUN_OPTIONAL = ("a0", "alpha", "tagged", "u", "kappa")
OUTPUT_KEYS = ("directory", "format")
OUTPUT_FORMATS = ("csv",)


@dataclass(frozen=True)
class RunSection:
    n: int
    horizon: float
    dt: float
    mode: Mode
    seed: int
    a0: float = 0.0
    alpha: float = 0.0
    tagged: Optional[int] = None
    u: float = 0.0
    kappa: float = 1.0


@dataclass(frozen=True)
class OutputSection:
    directory: Optional[str] = None
    format: str = "csv"


@dataclass(frozen=True)
class ScenarioFile:
    kernel: KernelSpec
    coefficients: CoefficientSet
    initial: InitialLaw
    run: RunSection
    output: Optional[OutputSection] = None
    source: Optional[str] = field(default=None, compare=False)

    @classmethod
    def from_dict(
        cls, content: Dict[str, Any], source: Optional[str] = None
    ) -> "ScenarioFile":
        where = source or "<scenario>"
        known = set(SECTIONS) | set(OPTIONAL_SECTIONS) | {"version"}
        _reject_unknown(where, "top level", set(content), known)
        for section in SECTIONS:
            if section not in content:
                raise ScenarioError(f"{where}: missing required section '{section}'")
            if not isinstance(content[section], dict):
                raise ScenarioError(f"{where}: section '{section}' must be a mapping")

        run = _parse_run(where, content["run"])
        kernel_family, kernel = _parse_family(where, "kernel", content, KERNEL_KEYS)
        drift_family, drift = _parse_family(where, "drift", content, DRIFT_KEYS)
        diffusion_family, diffusion = _parse_family(
            where, "diffusion", content, DIFFUSION_KEYS
        )
        rate_family, rate = _parse_family(where, "rate", content, RATE_KEYS)
        initial_family, initial = _parse_family(where, "initial", content, INITIAL_KEYS)

        output = None
        if "output" in content:
            output = _parse_output(where, content["output"])

        return cls(
            kernel=KernelSpec(KernelFamily(kernel_family), **kernel),
            coefficients=CoefficientSet(
                drift=DriftSpec(DriftFamily(drift_family), **drift),
                diffusion=DiffusionSpec(DiffusionFamily(diffusion_family), **diffusion),
                rate=RateSpec(RateFamily(rate_family), **rate),
            ),
            initial=InitialLaw(InitialFamily(initial_family), a0=run.a0, **initial),
            run=run,
            output=output,
            source=source,
        )

    def to_dict(self) -> Dict[str, Any]:
        coefficients = self.coefficients
        content: Dict[str, Any] = {
            "version": SCHEMA_VERSION,
            "kernel": _dump_family(self.kernel, KERNEL_KEYS),
            "drift": _dump_family(coefficients.drift, DRIFT_KEYS),
            "diffusion": _dump_family(coefficients.diffusion, DIFFUSION_KEYS),
            "rate": _dump_family(coefficients.rate, RATE_KEYS),
            "initial": _dump_family(self.initial, INITIAL_KEYS),
            "run": _dump_run(self.run),
        }
        if self.output is not None:
            output: Dict[str, Any] = {"format": self.output.format}
            if self.output.directory is not None:
                output["directory"] = self.output.directory
            content["output"] = output
        return content

    def to_run_config(
        self,
        seed: Optional[int] = None,
        threads: int = 1,
        record_paths: bool = False,
    ) -> RunConfig:
        run = self.run
        return RunConfig(
            n=run.n,
            horizon=run.horizon,
            dt=run.dt,
            kernel=self.kernel,
            coefficients=self.coefficients,
            initial=self.initial,
            a0=run.a0,
            alpha=run.alpha,
            mode=run.mode,
            seed=run.seed if seed is None else seed,
            tagged=run.tagged,
            u=run.u,
            kappa=run.kappa,
            threads=threads,
            record_paths=record_paths,
        )

    def output_directory(self, override: Optional[str] = None) -> Optional[str]:
        if override:
            return override
        if self.output is not None:
            return self.output.directory
        return None


def _reject_unknown(where: str, section: str, keys: Set[str], known: Set[str]) -> None:
    unknown = sorted(str(key) for key in keys - known)
    if unknown:
        raise ScenarioError(f"{where}: unknown keys in {section}: {', '.join(unknown)}")


def _number(where: str, section: str, key: str, value: Any) -> float:
    # bool is an int subclass; `c: yes` is not a number
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ScenarioError(
            f"{where}: {section}.{key} must be a decimal number, got {value!r}"
        )
    return float(value)


def _integer(where: str, section: str, key: str, value: Any) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        raise ScenarioError(
            f"{where}: {section}.{key} must be an integer, got {value!r}"
        )
    return value


def _parse_family(
    where: str,
    section: str,
    content: Dict[str, Any],
    catalog: Dict[str, Dict[str, str]],
) -> Tuple[str, Dict[str, float]]:
    values = content[section]
    family = values.get("family")
    if family not in catalog:
        raise ScenarioError(
            f"{where}: {section}.family must be one of "
            f"{', '.join(catalog)}, got {family!r}"
        )
    keys = catalog[family]
    _reject_unknown(where, section, set(values), set(keys) | {"family"})
    parsed = {}
    for key, attribute in keys.items():
        if key not in values:
            raise ScenarioError(f"{where}: {section}.{key} is required for {family}")
        parsed[attribute] = _number(where, section, key, values[key])
    return family, parsed


def _parse_mode(where: str, value: Any) -> Mode:
    # an unquoted `mode: true` reaches us as a YAML boolean
    if value is True:
        return Mode.TRUE
    try:
        return Mode(value)
    except ValueError:
        raise ScenarioError(
            f"{where}: run.mode must be one of "
            f"{', '.join(mode.value for mode in Mode)}, got {value!r}"
        )


def _parse_run(where: str, values: Dict[str, Any]) -> RunSection:
    _reject_unknown(where, "run", set(values), set(RUN_REQUIRED) | set(RUN_OPTIONAL))
    for key in RUN_REQUIRED:
        if key not in values:
            raise ScenarioError(f"{where}: run.{key} is required")
    mode = _parse_mode(where, values["mode"])
    tagged = values.get("tagged")
    if mode == Mode.ARTIFICIAL and tagged is None:
        raise ScenarioError(f"{where}: run.tagged is required for the artificial mode")
    optional = {
        key: _number(where, "run", key, values[key])
        for key in ("a0", "alpha", "u", "kappa")
        if key in values
    }
    return RunSection(
        n=_integer(where, "run", "n", values["n"]),
        horizon=_number(where, "run", "T", values["T"]),
        dt=_number(where, "run", "dt", values["dt"]),
        mode=mode,
        seed=_integer(where, "run", "seed", values["seed"]),
        tagged=None if tagged is None else _integer(where, "run", "tagged", tagged),
        **optional,
    )


def _parse_output(where: str, values: Any) -> OutputSection:
    if not isinstance(values, dict):
        raise ScenarioError(f"{where}: section 'output' must be a mapping")
    _reject_unknown(where, "output", set(values), set(OUTPUT_KEYS))
    output_format = values.get("format", "csv")
    if output_format not in OUTPUT_FORMATS:
        raise ScenarioError(
            f"{where}: output.format must be one of {', '.join(OUTPUT_FORMATS)}"
        )
    directory = values.get("directory")
    return OutputSection(
        directory=None if directory is None else str(directory), format=output_format
    )


def _dump_family(spec: Any, catalog: Dict[str, Dict[str, str]]) -> Dict[str, Any]:
    family = spec.family.value
    content: Dict[str, Any] = {"family": family}
    for key, attribute in catalog[family].items():
        content[key] = float(getattr(spec, attribute))
    return content


def _dump_run(run: RunSection) -> Dict[str, Any]:
    content: Dict[str, Any] = {
        "n": run.n,
        "T": run.horizon,
        "dt": run.dt,
        "mode": run.mode.value,
        "seed": run.seed,
        "a0": run.a0,
        "alpha": run.alpha,
    }
    if run.tagged is not None:
        content["tagged"] = run.tagged
    if run.mode.is_barnes or run.u != 0.0 or run.kappa != 1.0:
        content["u"] = run.u
        content["kappa"] = run.kappa
    return content


def load_scenario(path: str) -> ScenarioFile:
    return ScenarioFile.from_dict(get_scenario_file(path), source=str(path))


def dump_scenario(scenario: ScenarioFile, path: Optional[Path] = None) -> str:
    text = safe_dump(scenario.to_dict(), sort_keys=False)
    if path is not None:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(text, encoding="utf-8")
    return text
