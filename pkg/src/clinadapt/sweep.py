"""Budget sweeps over random clinical models, and heuristic-vs-optimum comparison.

A trial is a random clinical model: ``states`` physiological states, each with
its own stream table. Every row of the sweep aggregates one trial under one
(algorithm, k, tuple, budget fraction) cell; the budget of each state is the
fraction times that state's total full bandwidth.
"""

from __future__ import annotations

import csv
import io
import logging
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Iterator, Sequence

import numpy as np

from clinadapt import adapt, oracle
from clinadapt.model import (
    AdaptationInstance,
    Algorithm,
    AdaptError,
    RateLadder,
    StreamSpec,
    ladder_rate,
    plan_quality,
)
from clinadapt.priority import PriorityClass, PriorityTuple

log = logging.getLogger(__name__)

HEURISTIC_ORDER = (Algorithm.COMPROMISE, Algorithm.ROUND_ROBIN, Algorithm.AGGRESSIVE)
CLASSES = (PriorityClass.C11, PriorityClass.C12, PriorityClass.C21, PriorityClass.C22)
SWEEP_FIELDS = (
    "trial", "algorithm", "k", "tuple", "w_fraction", "total_quality", "adaptation_ratio",
    "ratio_c11", "ratio_c12", "ratio_c21", "ratio_c22",
    "qps_c11", "qps_c12", "qps_c21", "qps_c22",
    "bandwidth_ratio",
)
COMPARE_FIELDS = (
    "instance_seed", "n", "k", "W_fraction", "opt", "q_compromise", "q_roundrobin", "q_aggressive",
    "gap_compromise", "gap_roundrobin", "gap_aggressive",
)

SIZE_RANGE = (32, 4096)
MIN_STREAMS = 5


def _default_fractions():
    return tuple(Fraction(i, 10) for i in range(1, 11))


def _default_tuples():
    return (PriorityTuple.of(1, 1, 1), PriorityTuple.of(1, 2, 2), PriorityTuple.of(1, 3, 3))


@dataclass(frozen=True)
class SweepSpec:
    w_fractions: tuple[Fraction, ...] = field(default_factory=_default_fractions)
    k_values: tuple[int, ...] = (4, 6)
    tuples: tuple[PriorityTuple, ...] = field(default_factory=_default_tuples)
    trials: int = 10
    states: int = 30
    max_streams: int = 15
    seed: int = 0
    base: int = 2
    algorithms: tuple[Algorithm, ...] = HEURISTIC_ORDER
    oracle: bool = False

    def __post_init__(self):
        fr = tuple(Fraction(f) for f in self.w_fractions)
        if not fr or any(not 0 < f <= 1 for f in fr):
            raise ValueError("w_fractions must lie in (0, 1]")
        object.__setattr__(self, "w_fractions", fr)
        if self.trials < 1:
            raise ValueError("trials must be >= 1")
        if self.states < 1:
            raise ValueError("states must be >= 1")
        if self.max_streams < MIN_STREAMS:
            raise ValueError(f"max_streams must be >= {MIN_STREAMS}")

    @property
    def expected_rows(self) -> int:
        n_alg = len(self.algorithms) + (1 if self.oracle else 0)
        return self.trials * len(self.w_fractions) * len(self.k_values) * len(self.tuples) * n_alg


def random_model(spec: SweepSpec, trial: int) -> list[tuple[StreamSpec, ...]]:
    """Stream tables for every state of one trial; depends only on (seed, trial)."""
    rng = np.random.default_rng([spec.seed, trial])
    model = []
    for _ in range(spec.states):
        n = int(rng.integers(MIN_STREAMS, spec.max_streams + 1))
        sizes = rng.integers(SIZE_RANGE[0], SIZE_RANGE[1] + 1, size=n)
        bits = rng.integers(0, 2, size=(n, 2))
        model.append(
            tuple(
                StreamSpec(i, f"stream{i}", int(sizes[i]), bool(bits[i, 0]), bool(bits[i, 1]))
                for i in range(n)
            )
        )
    return model


@dataclass
class SweepRow:
    trial: int
    algorithm: Algorithm
    k: int
    tuple: PriorityTuple
    w_fraction: Fraction
    total_quality: Fraction | None
    adaptation_ratio: Fraction | None
    class_ratio: dict[PriorityClass, Fraction | None]
    class_qps: dict[PriorityClass, Fraction | None]
    bandwidth_ratio: Fraction | None

    def cells(self) -> list[str]:
        def num(x):
            return "" if x is None else repr(float(x))

        return [
            str(self.trial), self.algorithm.value, str(self.k), self.tuple.label(), str(self.w_fraction),
            num(self.total_quality), num(self.adaptation_ratio),
            *(num(self.class_ratio[c]) for c in CLASSES),
            *(num(self.class_qps[c]) for c in CLASSES),
            num(self.bandwidth_ratio),
        ]


def _evaluate(states, algorithm, ladder, tup, fraction, trial, k) -> SweepRow:
    total_q = Fraction(0)
    total_bw = Fraction(0)
    full_bw = 0
    ratios = []
    cls_q = {c: Fraction(0) for c in CLASSES}
    cls_full = {c: Fraction(0) for c in CLASSES}
    cls_n = {c: 0 for c in CLASSES}
    for streams in states:
        s_total = sum(s.full_bandwidth for s in streams)
        instance = AdaptationInstance(streams, ladder, tup, fraction * s_total)
        pr = instance.priorities()
        plan = adapt.run(algorithm, instance, pr)
        q_state = Fraction(0)
        full_state = Fraction(0)
        for s in streams:
            rate = ladder_rate(ladder, plan.assignment[s.id])
            weight = pr[s.id] * s.full_bandwidth
            c = s.priority_class
            cls_q[c] += weight * rate
            cls_full[c] += weight
            cls_n[c] += 1
            q_state += weight * rate
            full_state += weight
            total_bw += s.full_bandwidth * rate
        full_bw += s_total
        total_q += q_state
        ratios.append(q_state / full_state)
    return SweepRow(
        trial, algorithm, k, tup, fraction, total_q, sum(ratios, Fraction(0)) / len(ratios),
        {c: (cls_q[c] / cls_full[c] if cls_n[c] else None) for c in CLASSES},
        {c: (cls_q[c] / cls_n[c] if cls_n[c] else None) for c in CLASSES},
        total_bw / full_bw,
    )


def _null_row(trial, algorithm, k, tup, fraction) -> SweepRow:
    return SweepRow(trial, algorithm, k, tup, fraction, None, None,
                    {c: None for c in CLASSES}, {c: None for c in CLASSES}, None)


def iter_sweep(spec: SweepSpec) -> Iterator[SweepRow]:
    algorithms = list(spec.algorithms) + ([Algorithm.OPTIMAL] if spec.oracle else [])
    for trial in range(spec.trials):
        states = random_model(spec, trial)
        for algorithm in algorithms:
            for k in spec.k_values:
                ladder = RateLadder(spec.base, k)
                for tup in spec.tuples:
                    for fraction in spec.w_fractions:
                        try:
                            yield _evaluate(states, algorithm, ladder, tup, fraction, trial, k)
                        except AdaptError as exc:
                            # a failing cell is logged and left as nulls; the sweep goes on
                            log.warning("trial %d %s k=%d %s w=%s: %s", trial, algorithm.value, k,
                                        tup.label(), fraction, exc)
                            yield _null_row(trial, algorithm, k, tup, fraction)


def run_sweep(spec: SweepSpec) -> list[SweepRow]:
    return list(iter_sweep(spec))


def sweep_csv(rows: Sequence[SweepRow]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(SWEEP_FIELDS)
    for r in rows:
        w.writerow(r.cells())
    return buf.getvalue()


def write_sweep(rows: Sequence[SweepRow], out_dir) -> list[Path]:
    """One CSV per (algorithm, k, tuple); rows keep their generation order."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    groups: dict[tuple, list[SweepRow]] = {}
    for r in rows:
        groups.setdefault((r.algorithm.value, r.k, r.tuple.label()), []).append(r)
    paths = []
    for (alg, k, label), group in groups.items():
        path = out_dir / f"sweep_{alg}_k{k}_t{label}.csv"
        path.write_text(sweep_csv(group))
        paths.append(path)
    return paths


# --------------------------------------------------------------------------
# oracle comparison


@dataclass
class CompareRow:
    instance_seed: int
    n: int
    k: int
    w_fraction: Fraction
    opt: Fraction
    quality: dict[Algorithm, Fraction]

    def gap(self, algorithm: Algorithm) -> Fraction:
        return self.opt - self.quality[algorithm]

    def cells(self) -> list[str]:
        q = [self.quality[a] for a in HEURISTIC_ORDER]
        return [
            str(self.instance_seed), str(self.n), str(self.k), str(self.w_fraction), repr(float(self.opt)),
            *(repr(float(x)) for x in q),
            *(repr(float(self.gap(a))) for a in HEURISTIC_ORDER),
        ]


def random_instance(seed: int, max_n: int = 6, k_values=(1, 2, 3), max_size: int = 64,
                    tuples=None, base: int = 2) -> AdaptationInstance:
    rng = np.random.default_rng(seed)
    tuples = tuples or _default_tuples()
    n = int(rng.integers(1, max_n + 1))
    k = int(k_values[int(rng.integers(0, len(k_values)))])
    tup = tuples[int(rng.integers(0, len(tuples)))]
    streams = tuple(
        StreamSpec(i, f"s{i}", int(rng.integers(1, max_size + 1)), bool(rng.integers(0, 2)), bool(rng.integers(0, 2)))
        for i in range(n)
    )
    return AdaptationInstance(streams, RateLadder(base, k), tup, sum(s.full_bandwidth for s in streams))


def oracle_compare(instances: int = 200, seed: int = 0, max_n: int = 6, k_values=(1, 2, 3),
                   max_size: int = 64, w_fractions=None) -> list[CompareRow]:
    w_fractions = w_fractions or _default_fractions()
    rows = []
    for i in range(instances):
        inst_seed = seed * 1_000_003 + i
        base = random_instance(inst_seed, max_n, k_values, max_size)
        s_total = base.total_bandwidth
        for f in w_fractions:
            inst = base.with_budget(f * s_total)
            if inst.budget < inst.w_min:
                continue
            opt = oracle.dp_exact(inst).optimum_quality
            quality = {a: plan_quality(inst, adapt.run(a, inst)) for a in HEURISTIC_ORDER}
            rows.append(CompareRow(inst_seed, len(inst.streams), inst.ladder.depth, f, opt, quality))
    return rows


def compare_csv(rows: Sequence[CompareRow]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(COMPARE_FIELDS)
    for r in rows:
        w.writerow(r.cells())
    return buf.getvalue()
