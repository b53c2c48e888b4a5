"""Per-cycle session records and their line-delimited file format.

One record per control cycle: the environment step, the active mode, any
human input, the executed action, and any discrete decision. The file
format is one JSON object per line with a final totals line, so a partial
file (interrupted session) is still parseable.
"""

from __future__ import annotations

import json
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path

__all__ = ["LogRecord", "SessionLog"]


@dataclass(frozen=True)
class LogRecord:
    cycle: int
    t: int
    mode: str
    input: dict | None = None
    action: tuple[float, float] | None = None
    discrete_choice: int | None = None

    def to_dict(self) -> dict:
        return {
            "cycle": self.cycle,
            "t": self.t,
            "mode": self.mode,
            "input": self.input,
            "action": list(self.action) if self.action is not None else None,
            "discrete_choice": self.discrete_choice,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "LogRecord":
        action = data.get("action")
        return cls(
            cycle=int(data["cycle"]),
            t=int(data["t"]),
            mode=str(data["mode"]),
            input=data.get("input"),
            action=tuple(action) if action is not None else None,
            discrete_choice=data.get("discrete_choice"),
        )


@dataclass
class SessionLog:
    """Timestamped record of modes, human inputs, and discrete decisions."""

    seed: int
    env_seed: int
    records: list[LogRecord] = field(default_factory=list)

    def append(self, record: LogRecord) -> None:
        self.records.append(record)

    def mode_cycles(self) -> dict[str, int]:
        """Cycles spent in each mode, holds and pauses included."""
        return dict(Counter(r.mode for r in self.records))

    def discrete_decisions(self) -> int:
        return sum(1 for r in self.records if r.discrete_choice is not None)

    def totals(self) -> dict:
        return {
            "cycles": len(self.records),
            "mode_cycles": self.mode_cycles(),
            "discrete_decisions": self.discrete_decisions(),
        }

    def write(self, path, extra_totals: dict | None = None) -> None:
        totals = self.totals()
        if extra_totals:
            totals.update(extra_totals)
        with Path(path).open("w", encoding="utf-8") as fh:
            fh.write(json.dumps({"seed": self.seed, "env_seed": self.env_seed}) + "\n")
            for record in self.records:
                fh.write(json.dumps(record.to_dict()) + "\n")
            fh.write(json.dumps({"totals": totals}) + "\n")

    @classmethod
    def read(cls, path) -> "SessionLog":
        lines = [json.loads(line) for line in Path(path).read_text(encoding="utf-8").splitlines() if line]
        header = lines[0]
        log = cls(seed=int(header["seed"]), env_seed=int(header["env_seed"]))
        for data in lines[1:]:
            if "totals" in data:
                continue
            log.append(LogRecord.from_dict(data))
        return log
