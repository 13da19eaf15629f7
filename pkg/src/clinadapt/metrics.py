"""Plan quality, adaptation ratio and per-class statistics."""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Mapping

from clinadapt.model import (
    AdaptError,
    AdaptationInstance,
    AdaptationPlan,
    full_quality,
    ladder_rate,
    plan_bandwidth,
    plan_quality,
)
from clinadapt.priority import PriorityClass


class EmptyClass(AdaptError, ValueError):
    pass


@dataclass(frozen=True)
class ClassStats:
    stream_count: int
    avg_rate: Fraction | None
    avg_quality_per_stream: Fraction | None
    ratio: Fraction | None


@dataclass(frozen=True)
class MetricsReport:
    total_quality: Fraction
    full_quality: Fraction
    total_bandwidth: Fraction
    adaptation_ratio: Fraction
    per_class: dict[PriorityClass, ClassStats]

    @property
    def normalized_quality(self) -> Fraction:
        return self.adaptation_ratio


def _class_sums(instance, plan, priorities):
    """Per class: (count, sum of rates, sum of p*s*r, sum of p*s)."""
    sums = {c: [0, Fraction(0), Fraction(0), Fraction(0)] for c in PriorityClass}
    for s in instance.streams:
        rate = ladder_rate(instance.ladder, plan.assignment[s.id])
        weight = Fraction(priorities[s.id]) * s.full_bandwidth
        acc = sums[s.priority_class]
        acc[0] += 1
        acc[1] += rate
        acc[2] += weight * rate
        acc[3] += weight
    return sums


def report(
    instance: AdaptationInstance,
    plan: AdaptationPlan,
    priorities: Mapping[int, Fraction] | None = None,
) -> MetricsReport:
    if priorities is None:
        priorities = instance.priorities()
    total = plan_quality(instance, plan, priorities)
    full = full_quality(instance, priorities)
    per_class = {}
    for cls, (count, rate_sum, q_sum, full_sum) in _class_sums(instance, plan, priorities).items():
        if count:
            per_class[cls] = ClassStats(count, rate_sum / count, q_sum / count, q_sum / full_sum)
        else:
            per_class[cls] = ClassStats(0, None, None, None)
    return MetricsReport(total, full, plan_bandwidth(instance, plan), total / full, per_class)


def adaptation_ratio(instance, plan, priorities=None) -> Fraction:
    if priorities is None:
        priorities = instance.priorities()
    return plan_quality(instance, plan, priorities) / full_quality(instance, priorities)


def class_ratio(instance, plan, cls: PriorityClass | str, priorities=None) -> Fraction:
    cls = PriorityClass(cls)
    if priorities is None:
        priorities = instance.priorities()
    plan_bandwidth(instance, plan)  # validates coverage
    count, _, q_sum, full_sum = _class_sums(instance, plan, priorities)[cls]
    if not count:
        raise EmptyClass(f"no streams in class {cls.value}")
    return q_sum / full_sum
