"""Exact solvers for the multiple-choice knapsack behind rate adaptation.

Each stream is a group whose items are its ladder rates; exactly one item per
group is chosen. Quality is linear in bandwidth with slope equal to the
stream's global priority, which the fractional bound exploits directly.
"""

from __future__ import annotations

import enum
import itertools
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Mapping

import numpy as np

from clinadapt.adapt import floor_check, sorted_order
from clinadapt.model import AdaptError, AdaptationInstance, AdaptationPlan, Algorithm

BRUTE_FORCE_LIMIT = 10**7
DEFAULT_MAX_CAPACITY = 4_000_000


class TooLarge(AdaptError):
    pass


class CapacityOverflow(AdaptError):
    pass


class Method(str, enum.Enum):
    BRUTE_FORCE = "brute_force"
    DYNAMIC_PROGRAM = "dynamic_program"
    FRACTIONAL_BOUND = "fractional_bound"


@dataclass(frozen=True)
class OracleResult:
    optimum_quality: Fraction
    optimum_plan: AdaptationPlan
    method: Method


@dataclass
class _Scaled:
    """Integer view of an instance: costs in 1/c^k quanta, values times lcm(priority denominators)."""

    ids: list[int]
    costs: list[list[int]]  # costs[g][j]
    values: list[list[int]]
    capacity: int
    value_scale: int  # integer value / value_scale == quality


def _scale(instance: AdaptationInstance, priorities) -> _Scaled:
    floor_check(instance)
    if priorities is None:
        priorities = instance.priorities()
    ladder = instance.ladder
    q = ladder.quanta
    ids = sorted_order(instance, priorities)
    size = {s.id: s.full_bandwidth for s in instance.streams}
    pr = {sid: Fraction(priorities[sid]) for sid in ids}
    lcm = 1
    for p in pr.values():
        lcm = math.lcm(lcm, p.denominator)
    mult = [ladder.base ** (ladder.depth - j) for j in range(ladder.depth + 1)]
    costs = [[size[sid] * m for m in mult] for sid in ids]
    values = [[int(pr[sid] * lcm) * size[sid] * m for m in mult] for sid in ids]
    capacity = (instance.budget * q).__floor__()
    return _Scaled(ids, costs, values, capacity, lcm * q)


def _plan_from_choice(instance, ids, choice) -> AdaptationPlan:
    by_id = dict(zip(ids, choice))
    return AdaptationPlan({sid: by_id[sid] for sid in instance.ids}, Algorithm.OPTIMAL)


def brute_force(instance: AdaptationInstance, priorities: Mapping | None = None) -> OracleResult:
    k = instance.ladder.depth
    n = len(instance.streams)
    if (k + 1) ** n > BRUTE_FORCE_LIMIT:
        raise TooLarge(f"(k+1)^n = {k + 1}^{n} exceeds {BRUTE_FORCE_LIMIT}")
    sc = _scale(instance, priorities)
    best_value, best = -1, None
    # product() yields vectors in lexicographic order; strict > keeps the smallest on ties
    for choice in itertools.product(range(k + 1), repeat=n):
        cost = 0
        value = 0
        for g, j in enumerate(choice):
            cost += sc.costs[g][j]
            value += sc.values[g][j]
        if cost <= sc.capacity and value > best_value:
            best_value, best = value, choice
    return OracleResult(
        Fraction(best_value, sc.value_scale),
        _plan_from_choice(instance, sc.ids, best),
        Method.BRUTE_FORCE,
    )


def dp_exact(
    instance: AdaptationInstance,
    priorities: Mapping | None = None,
    max_capacity: int = DEFAULT_MAX_CAPACITY,
) -> OracleResult:
    """Group-choice knapsack DP over integer capacity quanta."""
    sc = _scale(instance, priorities)
    # every cost is a multiple of gcd(costs); shrinking by it is lossless
    g = 0
    for row in sc.costs:
        for c in row:
            g = math.gcd(g, c)
    costs = [[c // g for c in row] for row in sc.costs]
    cap = sc.capacity // g
    total_floor = sum(row[-1] for row in costs)
    # only the budget above the all-floor plan matters
    span = min(cap, sum(row[0] for row in costs)) - total_floor
    if span > max_capacity:
        raise CapacityOverflow(f"DP needs {span + 1} capacity cells (limit {max_capacity})")
    if sum(row[0] for row in sc.values) >= 2**62:
        raise CapacityOverflow("scaled quality exceeds 64-bit range")

    n = len(costs)
    width = span + 1
    neg = np.int64(-(2**62))
    dp = np.zeros(width, dtype=np.int64)
    choice = np.zeros((n, width), dtype=np.int8)
    for gi in range(n):
        floor_cost = costs[gi][-1]
        new = np.full(width, neg, dtype=np.int64)
        pick = np.zeros(width, dtype=np.int8)
        for j, (c, v) in enumerate(zip(costs[gi], sc.values[gi])):
            extra = c - floor_cost
            if extra >= width:
                continue
            cand = dp[: width - extra] + v
            better = cand > new[extra:]
            new[extra:] = np.where(better, cand, new[extra:])
            pick[extra:] = np.where(better, j, pick[extra:])
        dp = new
        choice[gi] = pick

    w = span
    picks = [0] * n
    for gi in range(n - 1, -1, -1):
        j = int(choice[gi, w])
        picks[gi] = j
        w -= costs[gi][j] - costs[gi][-1]
    return OracleResult(
        Fraction(int(dp[span]), sc.value_scale),
        _plan_from_choice(instance, sc.ids, picks),
        Method.DYNAMIC_PROGRAM,
    )


def fractional_bound(instance: AdaptationInstance, priorities: Mapping | None = None) -> Fraction:
    """LP-relaxation upper bound: continuous rates in [R_max, 1], filled by priority."""
    residual = floor_check(instance)
    if priorities is None:
        priorities = instance.priorities()
    floor = instance.ladder.floor
    size = {s.id: s.full_bandwidth for s in instance.streams}
    quality = sum((Fraction(priorities[sid]) * size[sid] * floor for sid in size), Fraction(0))
    for sid in sorted_order(instance, priorities):
        if residual <= 0:
            break
        room = size[sid] * (1 - floor)
        spend = min(room, residual)
        quality += Fraction(priorities[sid]) * spend
        residual -= spend
    return quality


def solve_optimal(instance: AdaptationInstance, priorities: Mapping | None = None) -> OracleResult:
    try:
        return dp_exact(instance, priorities)
    except CapacityOverflow:
        return brute_force(instance, priorities)
