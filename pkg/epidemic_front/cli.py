import sys
from typing import Callable
from typing import Dict
from typing import Optional
from typing import Sequence

from epidemic_front import barnes_run
from epidemic_front import lamperti_check
from epidemic_front import run_scenario
from epidemic_front import sir_baseline
from epidemic_front import sweep_decay
from epidemic_front import validate_suite
from epidemic_front.utils import red

COMMANDS: Dict[str, Callable[[Optional[Sequence[str]]], int]] = {
    "run": run_scenario.main,
    "validate": validate_suite.main,
    "sir": sir_baseline.main,
    "sweep": sweep_decay.main,
    "lamperti-check": lamperti_check.main,
    "barnes": barnes_run.main,
}


def usage() -> str:
    return f"usage: epifront {{{','.join(COMMANDS)}}} [args...]"


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = list(sys.argv[1:] if argv is None else argv)
    if not args or args[0] in ("-h", "--help"):
        print(usage())
        return 0 if args else 2

    command, rest = args[0], args[1:]
    if command not in COMMANDS:
        print(red(f"Unknown command {command!r}."), file=sys.stderr)
        print(usage(), file=sys.stderr)
        return 2
    return COMMANDS[command](rest)


if __name__ == "__main__":
    exit(main())
