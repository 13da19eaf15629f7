from fractions import Fraction

import pytest

from clinadapt.model import Algorithm
from clinadapt.priority import PriorityTuple
from clinadapt.sweep import (
    SWEEP_FIELDS,
    SweepSpec,
    oracle_compare,
    random_model,
    run_sweep,
    sweep_csv,
    write_sweep,
)

SMALL = dict(trials=2, states=4, k_values=(4,), w_fractions=(Fraction(1, 5), Fraction(3, 5), Fraction(1)))


def test_default_grid_size():
    assert SweepSpec().expected_rows == 10 * 10 * 2 * 3 * 3 == 1800
    assert SweepSpec(oracle=True).expected_rows == 2400


def test_spec_validation():
    with pytest.raises(ValueError):
        SweepSpec(w_fractions=(Fraction(0),))
    with pytest.raises(ValueError):
        SweepSpec(trials=0)


def test_random_model_shape_and_determinism():
    spec = SweepSpec(seed=5)
    model = random_model(spec, 3)
    assert len(model) == 30
    assert all(5 <= len(streams) <= 15 for streams in model)
    assert all(32 <= s.full_bandwidth <= 4096 for streams in model for s in streams)
    assert model == random_model(spec, 3)
    assert model != random_model(spec, 4)


def test_rows_and_full_budget():
    spec = SweepSpec(**SMALL)
    rows = run_sweep(spec)
    assert len(rows) == spec.expected_rows == 2 * 3 * 1 * 3 * 3
    for r in rows:
        if r.w_fraction == 1:
            assert r.adaptation_ratio == 1 and r.bandwidth_ratio == 1
            assert all(v in (None, 1) for v in r.class_ratio.values())


def test_csv_schema_and_determinism(tmp_path):
    spec = SweepSpec(**SMALL, seed=11)
    text = sweep_csv(run_sweep(spec))
    assert text.splitlines()[0] == ",".join(SWEEP_FIELDS)
    assert text == sweep_csv(run_sweep(spec))
    paths = write_sweep(run_sweep(spec), tmp_path)
    assert len(paths) == 9
    assert sum(len(p.read_text().splitlines()) - 1 for p in paths) == spec.expected_rows


def test_empty_classes_are_blank_not_zero():
    spec = SweepSpec(trials=1, states=1, max_streams=5, k_values=(4,), w_fractions=(Fraction(1, 2),), seed=0)
    rows = run_sweep(spec)
    counts = [sum(1 for s in random_model(spec, 0)[0] if s.priority_class == c) for c in ("C11", "C12", "C21", "C22")]
    for r in rows:
        cells = dict(zip(SWEEP_FIELDS, r.cells()))
        for c, n in zip(("c11", "c12", "c21", "c22"), counts):
            assert (cells[f"ratio_{c}"] == "") == (n == 0)


def test_oracle_rows_dominate_heuristics():
    spec = SweepSpec(trials=1, states=2, max_streams=5, k_values=(2,), tuples=(PriorityTuple.of(1, 2, 2),),
                     w_fractions=(Fraction(3, 10), Fraction(7, 10)), oracle=True)
    rows = run_sweep(spec)
    opt = {r.w_fraction: r.total_quality for r in rows if r.algorithm is Algorithm.OPTIMAL}
    for r in rows:
        assert r.total_quality <= opt[r.w_fraction]


def test_oracle_compare_gaps_non_negative():
    rows = oracle_compare(instances=30, seed=2)
    assert rows
    for r in rows:
        for a in (Algorithm.COMPROMISE, Algorithm.ROUND_ROBIN, Algorithm.AGGRESSIVE):
            assert r.gap(a) >= 0
