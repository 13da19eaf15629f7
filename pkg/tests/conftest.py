import itertools
from fractions import Fraction

import hypothesis
import pytest
from hypothesis import strategies as st

from clinadapt.model import AdaptationInstance, RateLadder, StreamSpec
from clinadapt.priority import PriorityTuple

hypothesis.settings.register_profile("ci", max_examples=200, deadline=None)
hypothesis.settings.register_profile("fast", max_examples=25, deadline=None)
hypothesis.settings.load_profile("ci")

A, B, C = 1, 2, 3


def make_i1(budget=16):
    # A: 8 kbps C22 (gp 4), B: 4 kbps C21 (gp 2), C: 4 kbps C11 (gp 1) under tuple (1,2,2)
    return AdaptationInstance(
        (
            StreamSpec(A, "A", 8, True, True),
            StreamSpec(B, "B", 4, True, False),
            StreamSpec(C, "C", 4, False, False),
        ),
        RateLadder(2, 2),
        PriorityTuple.of(1, 2, 2),
        budget,
    )


@pytest.fixture
def i1():
    return make_i1


def enumerate_best(sizes, prios, c, k, budget):
    """Plain enumeration over exponent vectors; independent of the package's solvers."""
    q = c**k
    cap = budget * q
    best = None
    for vec in itertools.product(range(k + 1), repeat=len(sizes)):
        cost = sum(s * c ** (k - j) for s, j in zip(sizes, vec))
        if cost > cap:
            continue
        value = sum(Fraction(p) * s * c ** (k - j) for s, p, j in zip(sizes, prios, vec)) / q
        if best is None or value > best[0]:
            best = (value, vec)
    return best


tuples = st.sampled_from(
    [PriorityTuple.of(1, 1, 1), PriorityTuple.of(1, 2, 2), PriorityTuple.of(1, 3, 3),
     PriorityTuple.of(1, Fraction(3, 2), 2), PriorityTuple.of(2, 5, 3)]
)


@st.composite
def instances(draw, max_n=6, max_k=4, max_size=64, bases=(2, 3)):
    n = draw(st.integers(1, max_n))
    k = draw(st.integers(1, max_k))
    c = draw(st.sampled_from(bases))
    streams = tuple(
        StreamSpec(i, f"s{i}", draw(st.integers(1, max_size)), draw(st.booleans()), draw(st.booleans()))
        for i in range(n)
    )
    ladder = RateLadder(c, k)
    total = sum(s.full_bandwidth for s in streams)
    w_min = total * ladder.floor
    frac = draw(st.fractions(0, Fraction(6, 5), max_denominator=64))
    budget = w_min + (total - w_min) * frac
    return AdaptationInstance(streams, ladder, draw(tuples), budget)


ACCEPTANCE_LINES = []


@pytest.fixture
def record():
    def _record(criterion, ok, detail=""):
        ACCEPTANCE_LINES.append(f"[{'PASS' if ok else 'FAIL'}] criterion {criterion}: {detail}")
        return ok

    return _record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
