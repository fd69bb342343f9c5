import argparse
import sys
from pathlib import Path
from typing import Dict
from typing import Optional
from typing import Sequence

import numpy as np

from epidemic_front.analysis import compute_V
from epidemic_front.analysis import summarize_trace
from epidemic_front.coefficients import RateSpec
from epidemic_front.epidemic import SystemTrace
from epidemic_front.epidemic import run
from epidemic_front.scenario import load_scenario
from epidemic_front.summary import ExitStatus
from epidemic_front.summary import RunSummary
from epidemic_front.utils import DEFAULT_OUTPUT_DIR
from epidemic_front.utils import InvalidConfigError
from epidemic_front.utils import ScenarioError
from epidemic_front.utils import add_output_args
from epidemic_front.utils import add_scenario_args
from epidemic_front.utils import add_seed_args
from epidemic_front.utils import add_threads_args
from epidemic_front.utils import get_thread_count
from epidemic_front.utils import green
from epidemic_front.utils import red
from epidemic_front.utils import write_csv

TRACE_COLUMNS = ("t", "A", "I", "C", "V", "M")
INFECTION_COLUMNS = ("particle", "tau")


def write_trace(trace: SystemTrace, rate: RateSpec, directory: Path) -> Dict[str, Path]:
    compensator = compute_V(trace, rate)
    martingale = trace.infected - compensator
    trace_path = directory / "trace.csv"
    write_csv(
        trace_path,
        TRACE_COLUMNS,
        (
            (
                float(trace.times[k]),
                float(trace.front[k]),
                float(trace.infected[k]),
                float(trace.contagion[k]),
                float(compensator[k]),
                float(martingale[k]),
            )
            for k in range(len(trace.times))
        ),
    )

    taus = trace.infection_times
    infected = np.flatnonzero(np.isfinite(taus))
    # ties on tau resolve by particle index
    order = infected[np.lexsort((infected, taus[infected]))]
    infections_path = directory / "infections.csv"
    write_csv(
        infections_path,
        INFECTION_COLUMNS,
        ((int(i), float(taus[i])) for i in order),
    )
    return {"trace": trace_path, "infections": infections_path}


def run_scenario(
    scenario_path: str,
    seed: Optional[int],
    output: Optional[str],
    threads: int,
) -> int:
    summary = RunSummary("run", scenario_path)
    try:
        scenario = load_scenario(scenario_path)
        config = scenario.to_run_config(seed=seed, threads=threads)
        trace = run(config)
    except ScenarioError as e:
        print(red(str(e)), file=sys.stderr)
        return ExitStatus.CONFIG_ERROR
    except InvalidConfigError as e:
        print(red(f"{scenario_path}: configuration failed validation"), file=sys.stderr)
        print(e.report, file=sys.stderr)
        return ExitStatus.CONFIG_ERROR

    directory = Path(scenario.output_directory(output) or DEFAULT_OUTPUT_DIR)
    files = write_trace(trace, config.coefficients.rate, directory)
    properties = summary.write(
        directory,
        ExitStatus.OK,
        {
            "seed": config.seed,
            "n": config.n,
            "mode": config.mode.value,
            **summarize_trace(trace, config.coefficients.rate),
        },
    )
    print(
        f"{config.mode.value} run of {config.n} particles: "
        f"final I = {properties['final_infected']:.4f}, "
        f"max |M| = {properties['max_abs_martingale']:.4f}"
    )
    for path in files.values():
        print(f"Wrote {green(path)}")
    return ExitStatus.OK


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = argparse.ArgumentParser(
        description="Simulate one scenario and export its front and infection curves."
    )
    add_scenario_args(parser, required=False)
    add_seed_args(parser)
    add_output_args(parser)
    add_threads_args(parser)

    args = parser.parse_args(argv)

    return run_scenario(
        args.scenario, args.seed, args.output, get_thread_count(args.threads)
    )


if __name__ == "__main__":
    exit(main())
