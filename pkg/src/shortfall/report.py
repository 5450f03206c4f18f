from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Any, Optional

from .errors import NumericalError


@dataclass(frozen=True)
class RiskReport:
    """A computed risk value with enough context to audit or tabulate it."""

    value: float
    method: str
    alpha: Optional[float]
    inputs: dict = field(default_factory=dict)
    tolerance_used: float = 0.0
    diagnostics: dict = field(default_factory=dict)

    def __post_init__(self):
        if not math.isfinite(self.value):
            raise NumericalError(f"{self.method} produced a non-finite value {self.value!r}")

    def to_record(self) -> dict[str, Any]:
        """Flat key/value view: value, method, alpha, tolerance_used, then inputs."""
        record = {
            "value": float(self.value),
            "method": self.method,
            "alpha": None if self.alpha is None else float(self.alpha),
            "tolerance_used": float(self.tolerance_used),
        }
        for key, val in self.inputs.items():
            record.setdefault(key, _plain(val))
        return record

    def to_json(self) -> str:
        return json.dumps(self.to_record())


def _plain(val):
    if isinstance(val, (bool, int, str)) or val is None:
        return val
    if isinstance(val, float):
        return val
    try:
        return float(val)
    except (TypeError, ValueError):
        return str(val)
