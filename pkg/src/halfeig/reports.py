"""Result records shared by the structural checks and the property suite."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any, Optional


@dataclass
class PropertyReport:
    """Outcome of one named property check.

    ``margin`` is the worst slack observed (positive means the property held
    with room to spare). A failed report always carries a counterexample that
    :func:`halfeig.verification.replay` can re-run.
    """

    name: str
    passed: bool
    margin: float = math.inf
    counterexample: Optional[dict] = None
    skipped: bool = False
    note: str = ""
    details: dict = field(default_factory=dict)

    def __post_init__(self):
        if not self.passed and not self.skipped and self.counterexample is None:
            raise ValueError(f"failed report {self.name!r} needs a counterexample")

    @property
    def status(self) -> str:
        if self.skipped:
            return "skip"
        return "pass" if self.passed else "fail"

    def as_row(self) -> dict[str, Any]:
        return {"name": self.name, "passed": self.passed, "margin": self.margin}
