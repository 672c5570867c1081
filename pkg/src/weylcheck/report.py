"""Verification report types shared by all checkers and the CLI."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from enum import Enum
from typing import Optional


class Mode(Enum):
    GLOBAL = "global"
    LOCAL = "local"
    COVARIANTIZE = "covariantize"
    DECOUPLING = "decoupling"
    IDENTITY = "identity"
    ORACLE = "oracle"


@dataclass(frozen=True)
class TraceStep:
    rule: str
    before: str
    after: str


@dataclass(frozen=True)
class OracleSummary:
    """Numeric cross-check summary; trials == 0 means the claim was
    established symbolically and no sampling ran."""
    trials: int = 0
    maxdev: Optional[float] = None
    seed: Optional[int] = None


@dataclass(frozen=True)
class VerificationReport:
    claim: str
    mode: Mode
    passed: bool
    residual: str
    trace: tuple[TraceStep, ...] = ()
    oracle: OracleSummary = field(default_factory=OracleSummary)

    def to_dict(self) -> dict:
        # key order is part of the golden-file contract
        return {
            "claim": self.claim,
            "mode": self.mode.value,
            "pass": self.passed,
            "residual": self.residual,
            "trace": [{"rule": s.rule, "before": s.before, "after": s.after}
                      for s in self.trace],
            "oracle": {"trials": self.oracle.trials,
                       "maxdev": self.oracle.maxdev,
                       "seed": self.oracle.seed},
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2) + "\n"

    def to_text(self) -> str:
        lines = [f"claim: {self.claim}",
                 f"mode: {self.mode.value}",
                 f"pass: {'yes' if self.passed else 'no'}",
                 f"residual: {self.residual}"]
        for s in self.trace:
            lines.append(f"  [{s.rule}]")
            lines.append(f"    before: {s.before}")
            lines.append(f"    after:  {s.after}")
        o = self.oracle
        if o.trials:
            dev = "n/a" if o.maxdev is None else f"{o.maxdev:.3e}"
            lines.append(f"oracle: {o.trials} trials, max deviation {dev}, "
                         f"seed {o.seed}")
        return "\n".join(lines) + "\n"
