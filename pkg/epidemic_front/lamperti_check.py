import argparse
import logging
import sys
from dataclasses import replace
from typing import List
from typing import Optional
from typing import Sequence

from epidemic_front.coefficients import DiffusionFamily
from epidemic_front.coefficients import DiffusionSpec
from epidemic_front.epidemic import RunConfig
from epidemic_front.epidemic import frozen_environment
from epidemic_front.lamperti import CheckResult
from epidemic_front.lamperti import TransformContext
from epidemic_front.lamperti import distribution_identity_check
from epidemic_front.lamperti import growth_bound
from epidemic_front.lamperti import local_time_rescaling_check
from epidemic_front.lamperti import pathwise_check
from epidemic_front.scenario import load_scenario
from epidemic_front.utils import SCENARIO_DIR
from epidemic_front.utils import ScenarioError
from epidemic_front.utils import add_report_args
from epidemic_front.utils import add_seed_args
from epidemic_front.utils import add_threads_args
from epidemic_front.utils import emit_report
from epidemic_front.utils import get_thread_count
from epidemic_front.utils import green
from epidemic_front.utils import red
from epidemic_front.utils import yellow

logger = logging.getLogger(__name__)

LAMPERTI_SCENARIO = SCENARIO_DIR / "lamperti.yaml"
DT_LADDER = (4e-3, 2e-3, 1e-3)
EPS_LADDER = (0.2, 0.1, 0.05)


def constant_diffusion(config: RunConfig) -> RunConfig:
    """Same scenario with sigma frozen at its base level."""
    coefficients = config.coefficients
    diffusion = DiffusionSpec(DiffusionFamily.CONSTANT, c=coefficients.diffusion.c)
    return config.with_changes(
        coefficients=replace(coefficients, diffusion=diffusion)
    )


def lamperti_checks(
    config: RunConfig,
    paths: int = 10_000,
    rescaling_paths: int = 500,
    dt_ladder: Sequence[float] = DT_LADDER,
    eps_ladder: Sequence[float] = EPS_LADDER,
) -> List[CheckResult]:
    results = [pathwise_check(constant_diffusion(config))]
    logger.debug("pathwise check done")
    results.append(distribution_identity_check(config, paths=paths))
    logger.debug("distribution identity check done")

    environment = frozen_environment(config)
    ctx = TransformContext.from_environment(
        config.coefficients.diffusion, config.times, environment
    )
    rescaling = local_time_rescaling_check(
        ctx,
        config.coefficients,
        rescaling_paths,
        dt_ladder,
        eps_ladder,
        seed=config.seed,
    )
    results.append(
        CheckResult(
            "local_time_rescaling",
            rescaling.decreasing,
            {
                **rescaling.to_dict(),
                "growth_bound": growth_bound(ctx, config.coefficients),
            },
        )
    )
    return results


def load_lamperti_config(
    scenario_path: str, seed: Optional[int], threads: int
) -> RunConfig:
    """Raises ScenarioError when the scenario cannot carry the frame change."""
    scenario = load_scenario(scenario_path)
    config = scenario.to_run_config(seed=seed, threads=threads)
    report = config.check(lamperti=True)
    if not report.ok:
        raise ScenarioError(
            f"{scenario_path}: configuration failed validation\n{report}"
        )
    if not report.lamperti_eligible:
        raise ScenarioError(
            f"{scenario_path}: kernel {config.kernel.family.value} is not "
            "absolutely continuous, the frame change does not apply"
        )
    return config


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = argparse.ArgumentParser(
        description="Check the change of frame and scale against the particle system."
    )
    parser.add_argument(
        "scenario",
        nargs="?",
        default=str(LAMPERTI_SCENARIO),
        help="YAML scenario with an absolutely continuous kernel.",
    )
    parser.add_argument(
        "--paths",
        type=int,
        default=10_000,
        help="Paths per sample in the distribution identity check.",
    )
    parser.add_argument(
        "--rescaling-paths",
        type=int,
        default=500,
        help="Paths per step size in the local time rescaling check.",
    )
    parser.add_argument(
        "--dt-ladder",
        nargs="+",
        type=float,
        default=list(DT_LADDER),
        help="Step sizes of the local time rescaling check.",
    )
    parser.add_argument(
        "--eps-ladder",
        nargs="*",
        type=float,
        default=list(EPS_LADDER),
        help="Band widths of the occupation estimates.",
    )
    add_seed_args(parser)
    add_threads_args(parser)
    add_report_args(parser)

    args = parser.parse_args(argv)

    try:
        config = load_lamperti_config(
            args.scenario, args.seed, get_thread_count(args.threads)
        )
    except ScenarioError as e:
        print(red(str(e)), file=sys.stderr)
        return 2

    results = lamperti_checks(
        config, args.paths, args.rescaling_paths, args.dt_ladder, args.eps_ladder
    )
    status_code = 0
    for result in results:
        if result.passed:
            print(f"{result.name}: {green('pass')}")
        else:
            status_code = 1
            print(f"{result.name}: {red('fail')}")
    emit_report(
        {
            "scenario": args.scenario,
            "passed": status_code == 0,
            "checks": [result.to_dict() for result in results],
        },
        args.report,
    )
    if status_code:
        print(yellow("Some checks of the frame change failed."))
    return status_code


if __name__ == "__main__":
    exit(main())
