from fractions import Fraction

import pytest
from hypothesis import given

from clinadapt import adapt
from clinadapt.metrics import EmptyClass, adaptation_ratio, class_ratio, report
from clinadapt.model import AdaptationInstance, PlanMismatch, RateLadder, StreamSpec, uniform_plan, AdaptationPlan, Algorithm
from clinadapt.priority import PriorityClass, PriorityTuple

from conftest import instances, make_i1


def test_report_full_and_floor():
    inst = make_i1()
    assert report(inst, uniform_plan(inst, 0)).adaptation_ratio == 1
    rep = report(inst, uniform_plan(inst, 2))
    assert rep.adaptation_ratio == Fraction(1, 4) == rep.normalized_quality


def test_report_compromise_w9():
    inst = make_i1(9)
    rep = report(inst, adapt.compromise(inst))
    assert rep.total_quality == 19
    assert rep.full_quality == 44
    assert rep.adaptation_ratio == Fraction(19, 44)


def test_report_per_class_i1_aggressive():
    inst = make_i1(9)
    rep = report(inst, adapt.aggressive(inst))
    c22, c21, c11, c12 = (rep.per_class[c] for c in ("C22", "C21", "C11", "C12"))
    assert (c22.stream_count, c22.avg_rate, c22.avg_quality_per_stream) == (1, Fraction(1, 2), 16)
    assert (c21.stream_count, c21.avg_rate, c21.avg_quality_per_stream) == (1, 1, 8)
    assert (c11.stream_count, c11.avg_rate, c11.avg_quality_per_stream) == (1, Fraction(1, 4), 1)
    assert c12.stream_count == 0 and c12.avg_rate is None and c12.ratio is None
    assert sum(s.stream_count for s in rep.per_class.values()) == 3


def test_class_ratio_i1_aggressive():
    inst = make_i1(9)
    plan = adapt.aggressive(inst)
    assert class_ratio(inst, plan, PriorityClass.C22) == Fraction(1, 2)
    assert class_ratio(inst, plan, "C21") == 1
    assert class_ratio(inst, plan, "C11") == Fraction(1, 4)
    with pytest.raises(EmptyClass):
        class_ratio(inst, plan, "C12")


def test_report_plan_mismatch():
    with pytest.raises(PlanMismatch):
        report(make_i1(), AdaptationPlan({1: 0}, Algorithm.OPTIMAL))


@given(instances())
def test_ratio_within_floor_and_one(inst):
    for h in (adapt.compromise, adapt.round_robin, adapt.aggressive):
        rep = report(inst, h(inst))
        assert inst.ladder.floor <= rep.adaptation_ratio <= 1
        for cls, stats in rep.per_class.items():
            if stats.stream_count:
                assert inst.ladder.floor <= stats.ratio <= 1
                assert class_ratio(inst, h(inst), cls) == stats.ratio


@given(instances())
def test_budget_monotonicity_compromise_and_aggressive(inst):
    total, floor_bw = inst.total_bandwidth, inst.w_min
    for h in (adapt.compromise, adapt.aggressive):
        ratios = [adaptation_ratio(inst.with_budget(floor_bw + (total - floor_bw) * Fraction(i, 20)),
                                   h(inst.with_budget(floor_bw + (total - floor_bw) * Fraction(i, 20))))
                  for i in range(21)]
        assert ratios == sorted(ratios), h.__name__


def test_round_robin_is_not_monotone_in_budget():
    # one-step-per-visit upgrades can starve a higher-priority stream when W grows
    inst = AdaptationInstance(
        (StreamSpec(0, "a", 4, True, False), StreamSpec(1, "b", 9)), RateLadder(2, 2), PriorityTuple.of(1, 2, 2), 1
    )
    lo, hi = inst.with_budget(Fraction(25, 4)), inst.with_budget(Fraction(13, 2))
    assert adaptation_ratio(lo, adapt.round_robin(lo)) == Fraction(41, 68)
    assert adaptation_ratio(hi, adapt.round_robin(hi)) == Fraction(1, 2)


@given(instances())
def test_degenerate_priorities_equal_sizes_give_equal_class_ratios_at_endpoints(inst):
    flat = AdaptationInstance(
        tuple(StreamSpec(s.id, s.name, 8, s.first_level, s.second_level) for s in inst.streams),
        inst.ladder, PriorityTuple.of(1, 1, 1), 8 * len(inst.streams),
    )
    for budget in (flat.total_bandwidth, flat.w_min):
        f = flat.with_budget(budget)
        for h in (adapt.compromise, adapt.round_robin, adapt.aggressive):
            rep = report(f, h(f))
            ratios = {s.ratio for s in rep.per_class.values() if s.stream_count}
            assert len(ratios) == 1
