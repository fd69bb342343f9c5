"""Acceptance suites over the library, one per structural property."""
import argparse
import logging
import math
import sys
from typing import Any
from typing import Callable
from typing import Dict
from typing import Optional
from typing import Sequence

import numpy as np

from epidemic_front.analysis import barnes_gap
from epidemic_front.analysis import check_trace_invariants
from epidemic_front.analysis import compensator_bias
from epidemic_front.analysis import coupling_check
from epidemic_front.analysis import l2_decay
from epidemic_front.analysis import martingale_test
from epidemic_front.analysis import tau_law_check
from epidemic_front.analysis import tie_stats
from epidemic_front.coefficients import ValidationReport
from epidemic_front.epidemic import Mode
from epidemic_front.epidemic import RunConfig
from epidemic_front.epidemic import run
from epidemic_front.lamperti_check import LAMPERTI_SCENARIO
from epidemic_front.lamperti_check import lamperti_checks
from epidemic_front.lamperti_check import load_lamperti_config
from epidemic_front.scenario import load_scenario
from epidemic_front.sde import reflected_local_time_statistics
from epidemic_front.utils import DEFAULT_SCENARIO
from epidemic_front.utils import SCENARIO_DIR
from epidemic_front.utils import InvalidConfigError
from epidemic_front.utils import ScenarioError
from epidemic_front.utils import add_report_args
from epidemic_front.utils import add_seed_args
from epidemic_front.utils import add_threads_args
from epidemic_front.utils import emit_report
from epidemic_front.utils import get_thread_count
from epidemic_front.utils import green
from epidemic_front.utils import red

logger = logging.getLogger(__name__)

REFLECTED_LOCAL_TIME_MEAN = math.sqrt(2 / math.pi)
OCCUPATION_RATIO = 2.0
DECAY_SLOPE_BAND = (-1.3, -0.7)
THREAD_COUNTS = (1, 4, 8)


def _report_dict(report: ValidationReport) -> Dict[str, Any]:
    return {
        "passed": report.ok,
        "entries": [
            {
                "condition": entry.condition,
                "status": entry.status.value,
                "message": entry.message,
            }
            for entry in report.entries
        ],
    }


def suite_invariants(config: RunConfig, replications: Optional[int]) -> Dict[str, Any]:
    trace = run(config.with_changes(record_paths=True))
    report = check_trace_invariants(trace, config)
    report.extend(coupling_check(config))

    reference = run(config.with_changes(threads=1))
    same = all(
        np.array_equal(reference.front, other.front)
        and np.array_equal(reference.infection_times, other.infection_times)
        for other in (run(config.with_changes(threads=t)) for t in THREAD_COUNTS[1:])
    )
    report.add("thread count independence", same, f"threads {THREAD_COUNTS}")

    paths = replications or 10_000
    statistics = reflected_local_time_statistics(
        paths,
        horizon=1.0,
        dt=1e-4,
        eps_ladder=(0.2, 0.1, 0.05),
        seed=config.seed,
        threads=config.threads,
    )
    relative = (
        abs(statistics.regulator_mean - REFLECTED_LOCAL_TIME_MEAN)
        / REFLECTED_LOCAL_TIME_MEAN
    )
    report.add(
        "reflected Brownian local time",
        relative <= 0.02,
        f"mean {statistics.regulator_mean:.5f} over {paths} paths",
    )
    ratios = statistics.ratios
    report.add(
        "occupation to regulator ratio",
        abs(ratios[-1] - OCCUPATION_RATIO) <= 0.25,
        ", ".join(
            f"eps {eps:g}: {ratio:.4f}" for eps, ratio in zip(statistics.eps, ratios)
        ),
    )
    return _report_dict(report)


def suite_martingale(
    config: RunConfig, replications: Optional[int], corrupt: float = 1.0
) -> Dict[str, Any]:
    result = martingale_test(config, replications or 200, corrupt=corrupt)
    return {"passed": result.consistent, **result.to_dict()}


def suite_compensator(
    config: RunConfig, replications: Optional[int]
) -> Dict[str, Any]:
    table = compensator_bias(config, replications=replications or 200)
    return {"passed": table.shrinking, **table.to_dict()}


def suite_decay(config: RunConfig, replications: Optional[int]) -> Dict[str, Any]:
    fit = l2_decay(config, replications=replications or 200)
    low, high = DECAY_SLOPE_BAND
    passed = not fit.degenerate and low <= fit.slope <= high
    return {"passed": passed, "band": list(DECAY_SLOPE_BAND), **fit.to_dict()}


def suite_tau_law(config: RunConfig, replications: Optional[int]) -> Dict[str, Any]:
    result = tau_law_check(config.with_changes(n=4), replications or 10_000)
    return {"passed": result.consistent, **result.to_dict()}


def suite_ties(config: RunConfig, replications: Optional[int]) -> Dict[str, Any]:
    table = tie_stats(config.with_changes(n=128), replications=replications or 20)
    return {"passed": table.decreasing, **table.to_dict()}


def suite_barnes(config: RunConfig, replications: Optional[int]) -> Dict[str, Any]:
    if not config.mode.is_barnes:
        config = config.with_changes(mode=Mode.BARNES_TILDE)
    gap = barnes_gap(config, replications=replications or 20)
    return {"passed": gap.decreasing, **gap.to_dict()}


def suite_lamperti(config: RunConfig, replications: Optional[int]) -> Dict[str, Any]:
    results = lamperti_checks(config, paths=replications or 10_000)
    return {
        "passed": all(result.passed for result in results),
        "checks": [result.to_dict() for result in results],
    }


SUITES: Dict[str, Callable[[RunConfig, Optional[int]], Dict[str, Any]]] = {
    "invariants": suite_invariants,
    "martingale": suite_martingale,
    "compensator": suite_compensator,
    "decay": suite_decay,
    "tau-law": suite_tau_law,
    "lamperti": suite_lamperti,
    "ties": suite_ties,
    "barnes": suite_barnes,
}
SUITE_SCENARIOS = {
    "lamperti": LAMPERTI_SCENARIO,
    "barnes": SCENARIO_DIR / "barnes.yaml",
}


def load_suite_config(
    suite: str, scenario_path: Optional[str], seed: Optional[int], threads: int
) -> RunConfig:
    path = scenario_path or str(SUITE_SCENARIOS.get(suite, DEFAULT_SCENARIO))
    if suite == "lamperti":
        return load_lamperti_config(path, seed, threads)
    config = load_scenario(path).to_run_config(seed=seed, threads=threads)
    report = config.check()
    if not report.ok:
        raise InvalidConfigError(report)
    return config


def validate(
    suite: str,
    scenario_path: Optional[str] = None,
    replications: Optional[int] = None,
    seed: Optional[int] = None,
    threads: int = 1,
    corrupt: float = 1.0,
) -> Dict[str, Any]:
    config = load_suite_config(suite, scenario_path, seed, threads)
    logger.debug("running suite %s", suite)
    if suite == "martingale":
        result = suite_martingale(config, replications, corrupt)
    else:
        result = SUITES[suite](config, replications)
    return {"suite": suite, **result}


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = argparse.ArgumentParser(
        description="Run one acceptance suite and report whether it passes."
    )
    parser.add_argument("suite", help=f"One of {', '.join(SUITES)}.")
    parser.add_argument(
        "scenario",
        nargs="?",
        default=None,
        help="YAML scenario; each suite has a bundled default.",
    )
    parser.add_argument(
        "--replications",
        type=int,
        default=None,
        help="Replications (or paths) of the suite; each suite has a default.",
    )
    parser.add_argument(
        "--corrupt-v",
        action="store_true",
        help="Scale the compensator by 2 in the martingale suite (negative control).",
    )
    add_seed_args(parser)
    add_threads_args(parser)
    add_report_args(parser)

    args = parser.parse_args(argv)

    if args.suite not in SUITES:
        print(
            red(f"Unknown suite {args.suite!r}. Choose from {', '.join(SUITES)}."),
            file=sys.stderr,
        )
        return 2

    try:
        result = validate(
            args.suite,
            args.scenario,
            args.replications,
            args.seed,
            get_thread_count(args.threads),
            corrupt=2.0 if args.corrupt_v else 1.0,
        )
    except ScenarioError as e:
        print(red(str(e)), file=sys.stderr)
        return 2
    except InvalidConfigError as e:
        print(red("configuration failed validation"), file=sys.stderr)
        print(e.report, file=sys.stderr)
        return 2
    except ValueError as e:
        print(red(str(e)), file=sys.stderr)
        return 2

    emit_report(result, args.report)
    if result["passed"]:
        print(f"{args.suite}: {green('pass')}")
        return 0
    print(f"{args.suite}: {red('fail')}")
    return 1


if __name__ == "__main__":
    exit(main())
