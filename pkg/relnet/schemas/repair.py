from typing import Dict, Tuple

import numpy as np
from pydantic import Field, field_validator, model_validator

from relnet.schemas.base import BaseSchema

PATTERN_ALIASES = str.maketrans({"−": "-", "∗": "*", "–": "-"})


class RepairSpec(BaseSchema):
    p_down: float = Field(gt=0, le=1, description="Per-step breaking probability")
    tau: int = Field(ge=1, description="Repair duration in time steps")

    @property
    def cycle_length(self) -> float:
        return 1.0 / self.p_down - 1.0 + self.tau


class TemporalPattern(BaseSchema):
    steps: str = Field(min_length=1)

    @field_validator("steps", mode="before")
    @classmethod
    def normalise(cls, value):
        if isinstance(value, str):
            value = value.translate(PATTERN_ALIASES)
            if set(value) - set("+-*"):
                raise ValueError(f"pattern {value!r} uses symbols outside '+', '-', '*'")
        return value

    def __len__(self) -> int:
        return len(self.steps)

    def __str__(self) -> str:
        return self.steps

    def expansions(self):
        """All sign patterns over {+,-} consistent with the wildcards."""
        patterns = [""]
        for symbol in self.steps:
            options = "+-" if symbol == "*" else symbol
            patterns = [p + o for p in patterns for o in options]
        return patterns


class JointDistribution3(BaseSchema):
    """Probabilities over (S(t1), S(t2), S(t3)) in {0,1}^3, index 4*S1 + 2*S2 + S3."""

    probabilities: Tuple[float, float, float, float, float, float, float, float]

    @model_validator(mode="after")
    def check_distribution(self):
        if any(p < 0 for p in self.probabilities):
            raise ValueError("joint distribution has negative entries")
        total = sum(self.probabilities)
        if abs(total - 1.0) > 1e-9:
            raise ValueError(f"joint distribution sums to {total:.12g}, expected 1")
        return self

    @classmethod
    def from_patterns(cls, table: Dict[str, float]) -> "JointDistribution3":
        values = [0.0] * 8
        for pattern, probability in table.items():
            values[pattern_index(pattern)] = probability
        return cls(probabilities=tuple(values))

    def as_array(self) -> np.ndarray:
        return np.asarray(self.probabilities, dtype=float).reshape(2, 2, 2)

    def pattern(self, pattern: str) -> float:
        return sum(self.probabilities[pattern_index(p)] for p in TemporalPattern(steps=pattern).expansions())

    def rows(self):
        for index in range(8):
            bits = format(index, "03b")
            yield "".join("+" if b == "1" else "-" for b in bits), self.probabilities[index]


class MonteCarloEstimate(BaseSchema):
    mean: float
    stderr: float
    samples: int

    def within(self, value: float, sigmas: float = 3.0) -> bool:
        return abs(self.mean - value) <= sigmas * self.stderr + 1e-12


def pattern_index(pattern: str) -> int:
    index = 0
    for symbol in pattern:
        index = 2 * index + (1 if symbol == "+" else 0)
    return index
