"""Compromise, Round-Robin and Aggressive rate adaptation.

All three start every stream at the floor rate R_max = 1/c^k and then spend
the residual budget W - S*R_max on upgrades, walking streams in descending
global priority. Budget arithmetic is done in integer quanta of 1/c^k kbps:
a stream of s kbps at exponent j costs s * c^(k-j) quanta, so every
comparison is exact and cheap.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, Mapping

from clinadapt.model import (
    AdaptationInstance,
    AdaptationPlan,
    Algorithm,
    InsufficientBudget,
)


def sorted_order(instance: AdaptationInstance, priorities: Mapping[int, Fraction] | None = None) -> list[int]:
    """Stream ids by global priority descending, then larger size, then smaller id."""
    # rank distinct priorities once so the sort compares plain ints
    if priorities is None:
        by_bits = instance.priority_by_bits()
        rank = {p: i for i, p in enumerate(sorted(set(by_bits.values()), reverse=True))}
        bit_rank = {bits: rank[p] for bits, p in by_bits.items()}
        keyed = [(bit_rank[s.first_level, s.second_level], -s.full_bandwidth, s.id) for s in instance.streams]
    else:
        rank = {p: i for i, p in enumerate(sorted({priorities[s.id] for s in instance.streams}, reverse=True))}
        keyed = [(rank[priorities[s.id]], -s.full_bandwidth, s.id) for s in instance.streams]
    keyed.sort()
    return [sid for _, _, sid in keyed]


def floor_check(instance: AdaptationInstance) -> Fraction:
    """Residual budget W_0 = W - S*R_max; raises InsufficientBudget below the floor."""
    w_min = instance.w_min
    if instance.budget < w_min:
        raise InsufficientBudget(instance.budget, w_min)
    return instance.budget - w_min


@dataclass
class _Prepared:
    ids: list[int]  # sorted order
    sizes: list[int]  # full bandwidths, aligned with ids
    cost: list[int]  # cost[j] multiplier: c^(k-j) quanta per kbps
    depth: int
    residual: int  # quanta

    def plan(self, exps: list[int], algorithm: Algorithm, instance: AdaptationInstance) -> AdaptationPlan:
        by_id = dict(zip(self.ids, exps))
        return AdaptationPlan({sid: by_id[sid] for sid in instance.ids}, algorithm)


def _prepare(instance: AdaptationInstance, priorities=None) -> _Prepared:
    floor_check(instance)
    ladder = instance.ladder
    q = ladder.quanta
    # costs are integral in quanta, so comparing against floor(W*q) loses nothing
    capacity = (instance.budget * q).__floor__()
    size_of = {s.id: s.full_bandwidth for s in instance.streams}
    ids = sorted_order(instance, priorities)
    sizes = [size_of[sid] for sid in ids]
    cost = [ladder.base ** (ladder.depth - j) for j in range(ladder.depth + 1)]
    return _Prepared(ids, sizes, cost, ladder.depth, capacity - instance.total_bandwidth)


def compromise(instance: AdaptationInstance, priorities=None) -> AdaptationPlan:
    p = _prepare(instance, priorities)
    k, cost, residual = p.depth, p.cost, p.residual
    exps = [k] * len(p.ids)
    for i, s in enumerate(p.sizes):
        full_increment = s * (cost[0] - 1)
        if full_increment <= residual:
            exps[i] = 0
            residual -= full_increment
            continue
        # boundary stream: largest ladder rate that fits on top of its reserved floor
        for j in range(1, k + 1):
            if s * cost[j] <= residual + s:
                exps[i] = j
                residual -= s * (cost[j] - 1)
                break
        break
    return p.plan(exps, Algorithm.COMPROMISE, instance)


def round_robin(instance: AdaptationInstance, priorities=None) -> AdaptationPlan:
    p = _prepare(instance, priorities)
    k, cost, residual, sizes = p.depth, p.cost, p.residual, p.sizes
    exps = [k] * len(p.ids)
    # A stream whose next step does not fit never fits later (the residual only
    # shrinks), so it leaves the rotation; each pass visits the survivors in order.
    active = [i for i in range(len(sizes)) if k > 0]
    while active:
        survivors = []
        for i in active:
            j = exps[i]
            step = sizes[i] * (cost[j - 1] - cost[j])
            if step <= residual:
                residual -= step
                exps[i] = j - 1
                if j - 1 > 0:
                    survivors.append(i)
        active = survivors
    return p.plan(exps, Algorithm.ROUND_ROBIN, instance)


def aggressive(instance: AdaptationInstance, priorities=None) -> AdaptationPlan:
    p = _prepare(instance, priorities)
    k, cost, residual = p.depth, p.cost, p.residual
    exps = [k] * len(p.ids)
    for i, s in enumerate(p.sizes):
        if residual <= 0:
            break
        for j in range(k):
            increment = s * (cost[j] - 1)
            if increment <= residual:
                exps[i] = j
                residual -= increment
                break
    return p.plan(exps, Algorithm.AGGRESSIVE, instance)


HEURISTICS: dict[Algorithm, Callable[..., AdaptationPlan]] = {
    Algorithm.COMPROMISE: compromise,
    Algorithm.ROUND_ROBIN: round_robin,
    Algorithm.AGGRESSIVE: aggressive,
}


def run(algorithm: Algorithm | str, instance: AdaptationInstance, priorities=None) -> AdaptationPlan:
    algorithm = Algorithm(algorithm)
    if algorithm is Algorithm.OPTIMAL:
        from clinadapt.oracle import solve_optimal

        return solve_optimal(instance, priorities).optimum_plan
    return HEURISTICS[algorithm](instance, priorities)
