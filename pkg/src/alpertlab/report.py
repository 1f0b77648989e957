"""Report containers shared across modules."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any


@dataclass
class ConstantReport:
    """A computed constant with its achieving witness and the parameters used."""

    name: str
    value: float
    witness: dict[str, Any] = field(default_factory=dict)
    params: dict[str, Any] = field(default_factory=dict)
    notes: list[str] = field(default_factory=list)

    def __post_init__(self):
        if self.value < 0:
            raise ValueError("constants are nonnegative")
