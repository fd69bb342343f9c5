import argparse
import csv
import json
import logging
import math
import os
from concurrent.futures import ProcessPoolExecutor
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path
from typing import Any
from typing import Callable
from typing import Dict
from typing import Iterable
from typing import List
from typing import Optional
from typing import Sequence
from typing import TypeVar

from yaml import safe_load

THREADS_ENV_VAR = "EPIFRONT_THREADS"
DEFAULT_OUTPUT_DIR = "epifront-output"
SCENARIO_DIR = Path(__file__).parent / "scenarios"
DEFAULT_SCENARIO = SCENARIO_DIR / "default.yaml"

logger = logging.getLogger(__name__)

T = TypeVar("T")
R = TypeVar("R")


class ScenarioError(RuntimeError):
    pass


class InvalidConfigError(RuntimeError):
    def __init__(self, report: Any):
        super().__init__(f"configuration failed validation:\n{report}")
        self.report = report


class NonFiniteInputError(ValueError):
    pass


class QuadratureError(RuntimeError):
    pass


class BracketingError(RuntimeError):
    pass


def scenario_safe_load(stream: Any) -> Dict[str, Any]:
    # safe_load returns None for empty documents
    return safe_load(stream) or {}


def get_scenario_file(scenario_path: str) -> Dict[str, Any]:
    path = Path(scenario_path)
    if not path.exists():
        alt_path = path.with_suffix(".yml" if path.suffix == ".yaml" else ".yaml")
        if alt_path.exists():
            path = alt_path
    try:
        with path.open(encoding="utf-8") as file:
            content = scenario_safe_load(file)
    except FileNotFoundError as e:
        raise ScenarioError(f"Unable to open scenario file ({e})")
    if not isinstance(content, dict):
        raise_invalid_scenario(scenario_path, "its top level is not a mapping")
    check_yml_version(scenario_path, content)
    return content


def check_yml_version(file_path: str, yaml_dct: Dict[str, Any]) -> None:
    if "version" not in yaml_dct:
        raise_invalid_scenario(
            file_path,
            "the scenario file {} is missing a version tag".format(file_path),
        )

    version = yaml_dct["version"]
    # bool is an int subclass; `version: true` is malformed too
    if not isinstance(version, int) or isinstance(version, bool):
        raise_invalid_scenario(
            file_path,
            "its 'version:' tag must be an integer (e.g. version: 1)."
            " {} is not an integer".format(version),
        )
    if version != 1:
        raise_invalid_scenario(
            file_path,
            "its 'version:' tag is set to {}.  Only 1 is supported".format(version),
        )


def raise_invalid_scenario(path: str, issue: str) -> None:
    raise ScenarioError(
        "The scenario file at {} is invalid because {}. Please consult the "
        "scenario schema section of the README.".format(path, issue)
    )


def get_thread_count(requested: Optional[int] = None) -> int:
    if requested is not None:
        return max(1, int(requested))
    value = os.environ.get(THREADS_ENV_VAR, "1")
    try:
        return max(1, int(value))
    except ValueError:
        logger.warning("ignoring non-integer %s=%r", THREADS_ENV_VAR, value)
        return 1


def map_parallel(
    func: Callable[[T], R], items: Iterable[T], threads: int = 1
) -> List[R]:
    """Apply ``func`` to every item, preserving input order in the result."""
    items = list(items)
    if threads <= 1 or len(items) <= 1:
        return [func(item) for item in items]
    with ThreadPoolExecutor(max_workers=threads) as executor:
        return list(executor.map(func, items))


def map_processes(
    func: Callable[[T], R], items: Iterable[T], workers: int = 1
) -> List[R]:
    """Like ``map_parallel`` but in worker processes.

    ``func`` and the items must be picklable: module level functions or
    ``functools.partial`` objects over them.
    """
    items = list(items)
    if workers <= 1 or len(items) <= 1:
        return [func(item) for item in items]
    chunksize = max(1, len(items) // (4 * workers))
    with ProcessPoolExecutor(max_workers=workers) as executor:
        return list(executor.map(func, items, chunksize=chunksize))


def format_float(value: float) -> str:
    if isinstance(value, float) and math.isnan(value):
        return "nan"
    return format(float(value), ".17g")


def write_csv(path: Path, header: Sequence[str], rows: Iterable[Sequence[Any]]) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow(
                [
                    format_float(value) if isinstance(value, float) else value
                    for value in row
                ]
            )


def write_json(path: Path, content: Dict[str, Any]) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w") as f:
        json.dump(content, f, indent=2, sort_keys=False)
        f.write("\n")


def add_scenario_args(parser: argparse.ArgumentParser, required: bool = True) -> None:
    parser.add_argument(
        "scenario",
        nargs=None if required else "?",
        default=None if required else str(DEFAULT_SCENARIO),
        help="Path of the YAML scenario file (see README for the schema).",
    )


def add_seed_args(parser: argparse.ArgumentParser) -> None:
    parser.add_argument(
        "--seed",
        type=int,
        default=None,
        help="Override the master seed of the scenario.",
    )


def add_output_args(parser: argparse.ArgumentParser) -> None:
    parser.add_argument(
        "--output",
        type=str,
        default=None,
        help="""Directory where result files are written. Takes precedence
        over the `output.directory` key of the scenario.""",
    )


def add_threads_args(parser: argparse.ArgumentParser) -> None:
    parser.add_argument(
        "--threads",
        type=int,
        default=None,
        help=f"Worker threads. Defaults to ${THREADS_ENV_VAR} or 1.",
    )


def add_replications_args(parser: argparse.ArgumentParser, default: int) -> None:
    parser.add_argument(
        "--replications",
        type=int,
        default=default,
        help="Number of independent replications.",
    )


def add_report_args(parser: argparse.ArgumentParser) -> None:
    parser.add_argument(
        "--report",
        type=str,
        default=None,
        help="Write the JSON report to this file instead of stdout.",
    )


def emit_report(content: Dict[str, Any], report_path: Optional[str]) -> None:
    if report_path:
        write_json(Path(report_path), content)
        print(f"Report written to {yellow(report_path)}")
    else:
        print(json.dumps(content, indent=2))


def red(string: Optional[Any]) -> str:
    return "\033[91m" + str(string) + "\033[0m"


def yellow(string: Optional[Any]) -> str:
    return "\033[93m" + str(string) + "\033[0m"


def green(string: Optional[Any]) -> str:
    return "\033[92m" + str(string) + "\033[0m"
