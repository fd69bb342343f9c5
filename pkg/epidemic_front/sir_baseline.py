import argparse
import sys
from pathlib import Path
from typing import Optional
from typing import Sequence

from epidemic_front.analysis import SirSeries
from epidemic_front.analysis import sir_integrate
from epidemic_front.utils import DEFAULT_OUTPUT_DIR
from epidemic_front.utils import green
from epidemic_front.utils import red
from epidemic_front.utils import write_csv

SIR_COLUMNS = ("t", "I", "C", "S", "R0", "Rt")
# infectious period after which the kernel mass is negligible, in days
DEFAULT_DBAR = 15.0


def write_sir(series: SirSeries, path: Path) -> None:
    susceptible = series.susceptible
    effective = series.effective_reproduction
    write_csv(
        path,
        SIR_COLUMNS,
        (
            (
                float(series.times[k]),
                float(series.infected[k]),
                float(series.contagion[k]),
                float(susceptible[k]),
                float(series.basic_reproduction),
                float(effective[k]),
            )
            for k in range(len(series.times))
        ),
    )


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = argparse.ArgumentParser(
        description="Integrate the deterministic SIR baseline and export it as CSV."
    )
    parser.add_argument(
        "--beta", type=float, default=0.3, help="Infection rate per unit contagion."
    )
    parser.add_argument(
        "--dbar", type=float, default=DEFAULT_DBAR, help="Recovery horizon."
    )
    parser.add_argument(
        "--i0", type=float, default=0.01, help="Initial infected proportion."
    )
    parser.add_argument("--c0", type=float, default=0.01, help="Initial contagion.")
    parser.add_argument("--horizon", type=float, default=100.0, help="Final time T.")
    parser.add_argument("--dt", type=float, default=0.1, help="RK4 step size.")
    parser.add_argument(
        "--output",
        type=str,
        default=None,
        help=f"CSV file to write. Defaults to {DEFAULT_OUTPUT_DIR}/sir.csv.",
    )

    args = parser.parse_args(argv)

    try:
        series = sir_integrate(
            args.beta, args.dbar, args.i0, args.c0, args.horizon, args.dt
        )
    except ValueError as e:
        print(red(str(e)), file=sys.stderr)
        return 2

    path = Path(args.output or Path(DEFAULT_OUTPUT_DIR) / "sir.csv")
    write_sir(series, path)
    print(
        f"R0 = {series.basic_reproduction:.4f}, "
        f"final I = {float(series.infected[-1]):.6f}"
    )
    print(f"Wrote {green(path)}")
    return 0


if __name__ == "__main__":
    exit(main())
