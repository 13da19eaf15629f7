import random
import statistics
import time
from fractions import Fraction

import pytest
from hypothesis import given
from hypothesis import strategies as st

from clinadapt import adapt
from clinadapt.model import (
    AdaptationInstance,
    InsufficientBudget,
    RateLadder,
    StreamSpec,
    dumps_plan,
    ladder_rate,
    plan_bandwidth,
    plan_quality,
)
from clinadapt.priority import PriorityTuple

from conftest import A, B, C, instances, make_i1

HEURISTICS = [adapt.compromise, adapt.round_robin, adapt.aggressive]


def exps(plan):
    return dict(plan.assignment)


def test_sorted_order_i1():
    assert adapt.sorted_order(make_i1()) == [A, B, C]


def test_sorted_order_tie_breaks():
    streams = (StreamSpec(5, "a", 10), StreamSpec(3, "b", 20), StreamSpec(4, "c", 10), StreamSpec(1, "d", 5, True))
    inst = AdaptationInstance(streams, RateLadder(), PriorityTuple.of(1, 2, 2), 100)
    # priority first, then larger size, then smaller id
    assert adapt.sorted_order(inst) == [1, 3, 4, 5]


@pytest.mark.parametrize("budget,residual", [(10, 6), (4, 0), (Fraction(9, 2), Fraction(1, 2))])
def test_floor_check(budget, residual):
    assert adapt.floor_check(make_i1(budget)) == residual


def test_floor_check_insufficient():
    with pytest.raises(InsufficientBudget) as err:
        adapt.floor_check(make_i1(3))
    assert err.value.w_min == 4
    assert "W_min=4" in str(err.value)


@pytest.mark.parametrize(
    "budget,expected,quality",
    [(10, {A: 0, B: 2, C: 2}, 35), (9, {A: 1, B: 2, C: 2}, 19), (16, {A: 0, B: 0, C: 0}, 44)],
)
def test_compromise_i1(budget, expected, quality):
    inst = make_i1(budget)
    plan = adapt.compromise(inst)
    assert exps(plan) == expected
    assert plan_quality(inst, plan) == quality


@pytest.mark.parametrize(
    "budget,expected,quality",
    [(9, {A: 1, B: 1, C: 1}, 22), (10, {A: 1, B: 0, C: 1}, 26), (16, {A: 0, B: 0, C: 0}, 44)],
)
def test_round_robin_i1(budget, expected, quality):
    inst = make_i1(budget)
    plan = adapt.round_robin(inst)
    assert exps(plan) == expected
    assert plan_quality(inst, plan) == quality


@pytest.mark.parametrize(
    "budget,expected,quality",
    [(9, {A: 1, B: 0, C: 2}, 25), (10, {A: 0, B: 2, C: 2}, 35), (4, {A: 2, B: 2, C: 2}, 11)],
)
def test_aggressive_i1(budget, expected, quality):
    inst = make_i1(budget)
    plan = adapt.aggressive(inst)
    assert exps(plan) == expected
    assert plan_quality(inst, plan) == quality


@pytest.mark.parametrize("heuristic", HEURISTICS)
def test_heuristics_reject_budget_below_floor(heuristic):
    with pytest.raises(InsufficientBudget):
        heuristic(make_i1(Fraction(39, 10)))


def naive_round_robin(inst):
    """Literal pass-by-pass loop: stops after a full pass without an upgrade."""
    order = adapt.sorted_order(inst)
    size = {s.id: s.full_bandwidth for s in inst.streams}
    k = inst.ladder.depth
    j = {sid: k for sid in order}
    residual = adapt.floor_check(inst)
    while True:
        upgraded = False
        for sid in order:
            if j[sid] == 0:
                continue
            step = size[sid] * (ladder_rate(inst.ladder, j[sid] - 1) - ladder_rate(inst.ladder, j[sid]))
            if step <= residual:
                residual -= step
                j[sid] -= 1
                upgraded = True
        if not upgraded:
            return j


@given(instances())
def test_round_robin_matches_literal_passes(inst):
    assert exps(adapt.round_robin(inst)) == naive_round_robin(inst)


@given(instances())
def test_budget_ladder_and_floor(inst):
    for h in HEURISTICS:
        plan = h(inst)
        assert plan_bandwidth(inst, plan) <= inst.budget
        assert all(0 <= j <= inst.ladder.depth for j in plan.assignment.values())
        assert set(plan.assignment) == set(inst.ids)


@given(instances())
def test_endpoints(inst):
    full = inst.with_budget(inst.total_bandwidth)
    low = inst.with_budget(inst.w_min)
    for h in HEURISTICS:
        assert set(h(full).assignment.values()) == {0}
        assert set(h(low).assignment.values()) == {inst.ladder.depth}


@given(instances())
def test_aggressive_dominates_compromise(inst):
    comp, aggr = adapt.compromise(inst), adapt.aggressive(inst)
    assert all(aggr.assignment[s] <= comp.assignment[s] for s in inst.ids)
    assert plan_quality(inst, aggr) >= plan_quality(inst, comp)


@given(instances(), st.fractions(min_value=Fraction(1, 10), max_value=50, max_denominator=20))
def test_priority_scaling_invariance(inst, factor):
    scaled = {sid: p * factor for sid, p in inst.priorities().items()}
    for h in HEURISTICS:
        assert h(inst, scaled).assignment == h(inst).assignment


@given(instances())
def test_compromise_rates_non_increasing_along_order(inst):
    plan = adapt.compromise(inst)
    order = [plan.assignment[sid] for sid in adapt.sorted_order(inst)]
    assert order == sorted(order)


@given(instances(), st.integers(1, 64))
def test_equal_sizes_rates_non_increasing(inst, size):
    same = AdaptationInstance(
        tuple(StreamSpec(s.id, s.name, size, s.first_level, s.second_level) for s in inst.streams),
        inst.ladder, inst.tuple, inst.budget / inst.total_bandwidth * size * len(inst.streams),
    )
    for h in HEURISTICS:
        plan = h(same)
        seq = [plan.assignment[sid] for sid in adapt.sorted_order(same)]
        assert seq == sorted(seq), h.__name__


@given(instances())
def test_determinism(inst):
    for h in HEURISTICS:
        assert dumps_plan(inst, h(inst)) == dumps_plan(inst, h(inst))


def big_instance(n, seed=0):
    rng = random.Random(seed)
    streams = tuple(StreamSpec(i, "s", rng.randint(32, 4096), rng.random() < 0.5, rng.random() < 0.5) for i in range(n))
    total = sum(s.full_bandwidth for s in streams)
    return AdaptationInstance(streams, RateLadder(2, 6), PriorityTuple.of(1, 2, 2), Fraction(4 * total, 10), max_streams=n)


def median_time(fn, inst, repeats=9):
    times = []
    for _ in range(repeats):
        t = time.perf_counter()
        fn(inst)
        times.append(time.perf_counter() - t)
    return statistics.median(times)


@pytest.mark.slow
@pytest.mark.parametrize("heuristic", HEURISTICS)
def test_scaling_doubling_n(heuristic):
    small, large = big_instance(4096), big_instance(8192)
    t_small, t_large = median_time(heuristic, small), median_time(heuristic, large)
    assert t_large <= 3 * t_small
