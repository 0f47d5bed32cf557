"""Outcome records for inequality checks, with JSON and Markdown rendering."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Any


def _clean(value: Any) -> Any:
    """Convert numpy scalars/arrays and non-finite floats to JSON-safe values."""
    if isinstance(value, dict):
        return {str(k): _clean(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_clean(v) for v in value]
    if hasattr(value, "tolist"):
        return _clean(value.tolist())
    if isinstance(value, bool) or value is None or isinstance(value, (int, str)):
        return value
    if isinstance(value, float):
        if math.isnan(value):
            return "nan"
        if math.isinf(value):
            return "inf" if value > 0 else "-inf"
        return value
    return str(value)


@dataclass
class BoundReport:
    """Result of checking one inequality over a set of sampled configurations.

    ``worst_ratio`` is LHS/RHS with the declared (or fitted) constant inserted,
    so ``passed`` should agree with ``worst_ratio <= 1``. ``fitted_constant`` is
    the smallest constant that makes the inequality hold on every sample.
    Composite checks keep their parts in ``children``; a composite passes when
    every gated child passes.
    """

    name: str
    passed: bool
    worst_ratio: float = 0.0
    fitted_constant: float = 0.0
    configurations: list[dict] = field(default_factory=list)
    notes: list[str] = field(default_factory=list)
    gated: bool = True
    children: list["BoundReport"] = field(default_factory=list)
    extra: dict = field(default_factory=dict)

    @classmethod
    def combine(cls, name: str, children: list["BoundReport"], **kwargs) -> "BoundReport":
        gated = [c for c in children if c.gated]
        ratios = [c.worst_ratio for c in gated] or [0.0]
        passed = all(c.passed for c in gated)
        return cls(name=name, passed=passed, worst_ratio=max(ratios),
                   fitted_constant=kwargs.pop("fitted_constant", max(ratios)),
                   children=children, **kwargs)

    def failures(self) -> list[str]:
        """Names of every gated check (recursively) that failed."""
        out = []
        if self.gated and not self.passed and not self.children:
            out.append(self.name)
        for child in self.children:
            out.extend(f"{self.name}/{n}" for n in child.failures())
        if self.gated and not self.passed and self.children and not out:
            out.append(self.name)
        return out

    def to_dict(self) -> dict:
        return _clean({
            "name": self.name,
            "passed": self.passed,
            "gated": self.gated,
            "worst_ratio": self.worst_ratio,
            "fitted_constant": self.fitted_constant,
            "configurations": self.configurations,
            "notes": self.notes,
            "extra": self.extra,
            "children": [c.to_dict() for c in self.children],
        })

    def to_json(self, **kwargs) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, **kwargs)

    def to_markdown(self, depth: int = 0) -> str:
        rows = []
        if depth == 0:
            rows.append("| check | gated | pass | worst ratio | fitted C | notes |")
            rows.append("|---|---|---|---|---|---|")
        indent = "&nbsp;&nbsp;" * depth
        status = "PASS" if self.passed else "FAIL"
        note = "; ".join(self.notes)
        rows.append(f"| {indent}{self.name} | {'yes' if self.gated else 'no'} | {status} | "
                    f"{self.worst_ratio:.6g} | {self.fitted_constant:.6g} | {note} |")
        for child in self.children:
            rows.append(child.to_markdown(depth + 1))
        return "\n".join(rows)

    def summary_line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        return f"[{status}] {self.name}: worst ratio {self.worst_ratio:.4g}, fitted C {self.fitted_constant:.4g}"
