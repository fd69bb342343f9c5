import time
from dataclasses import dataclass
from dataclasses import field
from enum import IntEnum
from pathlib import Path
from typing import Any
from typing import Dict
from typing import Optional

from epidemic_front.utils import write_json


class ExitStatus(IntEnum):
    OK = 0
    CHECK_FAILED = 1
    CONFIG_ERROR = 2

    @property
    def label(self) -> str:
        return self.name.lower().replace("_", " ")


@dataclass
class RunSummary:
    """Properties of one command invocation, written as ``summary.json`` next
    to the command's other outputs."""

    command: str
    scenario: Optional[str] = None
    started: float = field(default_factory=time.perf_counter)

    def __post_init__(self) -> None:
        if not isinstance(self.command, str) or not self.command:
            raise ValueError("command must be a non-empty string")

    @property
    def elapsed(self) -> float:
        return time.perf_counter() - self.started

    def record(
        self, status: ExitStatus, results: Optional[Dict[str, Any]] = None
    ) -> Dict[str, Any]:
        """Header fields first, then ``results``; a result may not shadow a
        header field."""
        header = {
            "command": self.command,
            "scenario": self.scenario,
            "status": ExitStatus(status).label,
            "exit_code": int(status),
        }
        results = results or {}
        clashes = sorted(set(header) & set(results))
        if clashes:
            raise ValueError(f"results override summary fields: {clashes}")
        return {**header, **results, "runtime_seconds": self.elapsed}

    def write(
        self,
        directory: Path,
        status: ExitStatus,
        results: Optional[Dict[str, Any]] = None,
    ) -> Dict[str, Any]:
        properties = self.record(status, results)
        write_json(directory / "summary.json", properties)
        return properties
