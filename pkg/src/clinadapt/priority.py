"""Physiology-aware priority calculator.

Two binary priority bits per stream (model-level, state-level) are folded
into one global priority by multiplying the tuple factor each bit selects.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from fractions import Fraction


class PriorityClass(str, enum.Enum):
    C11 = "C11"
    C12 = "C12"
    C21 = "C21"
    C22 = "C22"


@dataclass(frozen=True)
class PriorityTuple:
    p0: Fraction = Fraction(1)
    p1: Fraction = Fraction(2)
    p2: Fraction = Fraction(2)

    def __post_init__(self):
        for name in ("p0", "p1", "p2"):
            value = Fraction(getattr(self, name))
            if value <= 0:
                raise ValueError(f"priority {name} must be positive, got {value}")
            object.__setattr__(self, name, value)

    @classmethod
    def of(cls, p0, p1, p2) -> PriorityTuple:
        return cls(Fraction(p0), Fraction(p1), Fraction(p2))

    def label(self) -> str:
        return "-".join(str(p) for p in (self.p0, self.p1, self.p2))


PRESETS = {
    "none": PriorityTuple.of(1, 1, 1),
    "1-2-2": PriorityTuple.of(1, 2, 2),
    "1-3-3": PriorityTuple.of(1, 3, 3),
}


def classify(first: bool, second: bool) -> PriorityClass:
    return {
        (False, False): PriorityClass.C11,
        (False, True): PriorityClass.C12,
        (True, False): PriorityClass.C21,
        (True, True): PriorityClass.C22,
    }[(bool(first), bool(second))]


def global_priority(first: bool, second: bool, tuple: PriorityTuple) -> Fraction:
    f1 = tuple.p1 if first else tuple.p0
    f2 = tuple.p2 if second else tuple.p0
    return f1 * f2
