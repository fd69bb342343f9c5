import argparse
import sys
from pathlib import Path
from typing import Optional
from typing import Sequence

from epidemic_front.analysis import DecayFit
from epidemic_front.analysis import l2_decay
from epidemic_front.scenario import load_scenario
from epidemic_front.utils import DEFAULT_OUTPUT_DIR
from epidemic_front.utils import InvalidConfigError
from epidemic_front.utils import ScenarioError
from epidemic_front.utils import add_output_args
from epidemic_front.utils import add_replications_args
from epidemic_front.utils import add_report_args
from epidemic_front.utils import add_scenario_args
from epidemic_front.utils import add_seed_args
from epidemic_front.utils import add_threads_args
from epidemic_front.utils import emit_report
from epidemic_front.utils import get_thread_count
from epidemic_front.utils import green
from epidemic_front.utils import red
from epidemic_front.utils import write_csv
from epidemic_front.utils import yellow


def write_decay(fit: DecayFit, path: Path) -> None:
    write_csv(
        path,
        ("n", "sup_M2"),
        ((n, float(estimate)) for n, estimate in zip(fit.sizes, fit.estimates)),
    )


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = argparse.ArgumentParser(
        description="Estimate E[sup |M|^2] across population sizes and fit its decay."
    )
    add_scenario_args(parser, required=False)
    parser.add_argument(
        "--sizes",
        nargs="+",
        type=int,
        default=[64, 128, 256, 512],
        help="Geometric ladder of population sizes, at least four.",
    )
    add_replications_args(parser, default=200)
    parser.add_argument(
        "--bootstrap",
        type=int,
        default=1000,
        help="Bootstrap resamples for the slope interval.",
    )
    add_seed_args(parser)
    add_output_args(parser)
    add_threads_args(parser)
    add_report_args(parser)

    args = parser.parse_args(argv)

    try:
        scenario = load_scenario(args.scenario)
        config = scenario.to_run_config(
            seed=args.seed, threads=get_thread_count(args.threads)
        )
        report = config.check()
        if not report.ok:
            raise InvalidConfigError(report)
        fit = l2_decay(
            config, args.sizes, replications=args.replications, bootstrap=args.bootstrap
        )
    except ScenarioError as e:
        print(red(str(e)), file=sys.stderr)
        return 2
    except InvalidConfigError as e:
        print(red(f"{args.scenario}: configuration failed validation"), file=sys.stderr)
        print(e.report, file=sys.stderr)
        return 2
    except ValueError as e:
        print(red(str(e)), file=sys.stderr)
        return 2

    directory = Path(scenario.output_directory(args.output) or DEFAULT_OUTPUT_DIR)
    write_decay(fit, directory / "decay.csv")
    emit_report(fit.to_dict(), args.report)
    if fit.degenerate:
        print(yellow("Every estimate is zero, no slope was fitted."))
    else:
        low, high = fit.ci
        print(f"slope {green(f'{fit.slope:.3f}')} [{low:.3f}, {high:.3f}]")
    return 0


if __name__ == "__main__":
    exit(main())
