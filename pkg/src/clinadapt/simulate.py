"""Clinical automata, bandwidth traces and timeline replay.

A replay walks a bandwidth trace sample by sample, applies scripted clinical
events to the automaton, and re-runs the chosen heuristic on the current
state's streams every time, logging one row per adaptation instant.
"""

from __future__ import annotations

import csv
import io
import json
import logging
import math
from dataclasses import dataclass, field
from fractions import Fraction
from importlib import resources
from typing import Iterable, Sequence

import numpy as np

from clinadapt import adapt
from clinadapt.metrics import report
from clinadapt.model import (
    AdaptError,
    AdaptationInstance,
    AdaptationPlan,
    Algorithm,
    RateLadder,
    SchemaError,
    StreamSpec,
    format_fraction,
    parse_rational,
    stream_from_dict,
    stream_to_dict,
    uniform_plan,
)
from clinadapt.priority import PriorityTuple

log = logging.getLogger(__name__)

SAMPLE_INTERVAL_MS = 4000
TRACE_FIELDS = ("t_ms", "kbps", "lat", "lon", "alt_m", "velocity")
TRACE_HEADER_COMMENT = "# kbps uses 1 kilobit = 1024 bits (1 byte = 0.0078125 kilobits); t_ms since trip start"


class AmbiguousTransition(AdaptError):
    pass


class TraceError(SchemaError):
    pass


# --------------------------------------------------------------------------
# automaton


@dataclass(frozen=True)
class State:
    id: str
    name: str
    streams: tuple[StreamSpec, ...]


@dataclass(frozen=True)
class Transition:
    source: str
    target: str
    trigger: str


@dataclass(frozen=True)
class ClinicalAutomaton:
    initial: str
    states: tuple[State, ...]
    transitions: tuple[Transition, ...]

    def __post_init__(self):
        ids = [s.id for s in self.states]
        if len(set(ids)) != len(ids):
            raise SchemaError("automaton: duplicate state ids")
        if self.initial not in ids:
            raise SchemaError(f"automaton: initial state {self.initial!r} is not a state")
        for s in self.states:
            if not s.streams:
                raise SchemaError(f"automaton: state {s.id!r} has no streams")
            sids = [x.id for x in s.streams]
            if len(set(sids)) != len(sids):
                raise SchemaError(f"automaton: state {s.id!r} repeats a stream id")
        for t in self.transitions:
            for end in (t.source, t.target):
                if end not in ids:
                    raise SchemaError(f"automaton: transition {t.trigger!r} references unknown state {end!r}")

    def state(self, state_id: str) -> State:
        for s in self.states:
            if s.id == state_id:
                return s
        raise KeyError(state_id)

    @property
    def triggers(self) -> set[str]:
        return {t.trigger for t in self.transitions}


def step_automaton(automaton: ClinicalAutomaton, current: str, trigger: str) -> str:
    automaton.state(current)
    matches = [t for t in automaton.transitions if t.source == current and t.trigger == trigger]
    if len(matches) > 1:
        raise AmbiguousTransition(f"state {current!r} has {len(matches)} transitions on {trigger!r}")
    if not matches:
        log.info("ignored trigger %r in state %r", trigger, current)
        return current
    return matches[0].target


def automaton_from_dict(obj) -> ClinicalAutomaton:
    if not isinstance(obj, dict):
        raise SchemaError("automaton: expected a JSON object")
    extra = set(obj) - {"initial", "states", "transitions"}
    if extra:
        raise SchemaError(f"automaton: unknown field(s) {sorted(extra)}")
    states = []
    for i, s in enumerate(obj.get("states", [])):
        where = f"automaton.states[{i}]"
        if set(s) != {"id", "name", "streams"}:
            raise SchemaError(f"{where}: expected fields id, name, streams")
        streams = tuple(stream_from_dict(x, f"{where}.streams[{m}]") for m, x in enumerate(s["streams"]))
        states.append(State(str(s["id"]), str(s["name"]), streams))
    transitions = []
    for i, t in enumerate(obj.get("transitions", [])):
        if set(t) != {"from", "to", "trigger"}:
            raise SchemaError(f"automaton.transitions[{i}]: expected fields from, to, trigger")
        transitions.append(Transition(str(t["from"]), str(t["to"]), str(t["trigger"])))
    if "initial" not in obj:
        raise SchemaError("automaton: missing initial")
    return ClinicalAutomaton(str(obj["initial"]), tuple(states), tuple(transitions))


def automaton_to_dict(a: ClinicalAutomaton) -> dict:
    return {
        "initial": a.initial,
        "states": [
            {"id": s.id, "name": s.name, "streams": [stream_to_dict(x) for x in s.streams]} for s in a.states
        ],
        "transitions": [{"from": t.source, "to": t.target, "trigger": t.trigger} for t in a.transitions],
    }


def loads_automaton(text: str) -> ClinicalAutomaton:
    try:
        obj = json.loads(text)
    except json.JSONDecodeError as exc:
        raise SchemaError(f"automaton JSON: {exc.msg} at line {exc.lineno} column {exc.colno}") from exc
    return automaton_from_dict(obj)


def dumps_automaton(a: ClinicalAutomaton) -> str:
    return json.dumps(automaton_to_dict(a), indent=2) + "\n"


def stroke_automaton() -> ClinicalAutomaton:
    """The shipped stroke fixture (CT review, hemorrhagic and ischemic branches)."""
    text = resources.files("clinadapt").joinpath("fixtures/stroke.json").read_text()
    return loads_automaton(text)


# --------------------------------------------------------------------------
# traces


@dataclass(frozen=True)
class TraceSample:
    t_ms: int
    kbps: int | float
    lat: float | None = None
    lon: float | None = None
    alt_m: float | None = None
    velocity: float | None = None


@dataclass(frozen=True)
class BandwidthTrace:
    samples: tuple[TraceSample, ...]

    def __post_init__(self):
        object.__setattr__(self, "samples", tuple(self.samples))
        prev = None
        for s in self.samples:
            if s.kbps < 0:
                raise TraceError(f"negative kbps at t_ms={s.t_ms}")
            if prev is not None and s.t_ms <= prev:
                raise TraceError(f"t_ms must be strictly increasing (t_ms={s.t_ms} after {prev})")
            prev = s.t_ms

    def __len__(self):
        return len(self.samples)

    @property
    def duration_ms(self) -> int:
        if not self.samples:
            return 0
        return self.samples[-1].t_ms - self.samples[0].t_ms

    def kbps(self) -> list:
        return [s.kbps for s in self.samples]


def _fmt(v) -> str:
    return "" if v is None else str(v)


def _num(text: str, what: str, line: int):
    text = text.strip()
    if text == "":
        return None
    try:
        if text.lstrip("-").isdigit():
            return int(text)
        value = float(text)
    except ValueError:
        raise TraceError(f"line {line}: {what} {text!r} is not a number") from None
    if not math.isfinite(value):
        raise TraceError(f"line {line}: {what} must be finite")
    return value


def dumps_trace(trace: BandwidthTrace) -> str:
    buf = io.StringIO()
    buf.write(TRACE_HEADER_COMMENT + "\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(TRACE_FIELDS)
    for s in trace.samples:
        w.writerow([_fmt(getattr(s, f)) for f in TRACE_FIELDS])
    return buf.getvalue()


def loads_trace(text: str) -> BandwidthTrace:
    samples = []
    header_seen = False
    for lineno, line in enumerate(text.splitlines(), start=1):
        if not line.strip() or line.startswith("#"):
            continue
        cells = next(csv.reader([line]))
        if not header_seen:
            if tuple(c.strip() for c in cells) != TRACE_FIELDS:
                raise TraceError(f"line {lineno}: expected header {','.join(TRACE_FIELDS)}")
            header_seen = True
            continue
        if len(cells) != len(TRACE_FIELDS):
            raise TraceError(f"line {lineno}: expected {len(TRACE_FIELDS)} fields, got {len(cells)}")
        values = {f: _num(c, f, lineno) for f, c in zip(TRACE_FIELDS, cells)}
        if not isinstance(values["t_ms"], int):
            raise TraceError(f"line {lineno}: t_ms must be an integer")
        if values["kbps"] is None:
            raise TraceError(f"line {lineno}: kbps is required")
        if values["kbps"] < 0:
            raise TraceError(f"line {lineno}: kbps must be non-negative")
        if samples and values["t_ms"] <= samples[-1].t_ms:
            raise TraceError(f"line {lineno}: t_ms must be strictly increasing")
        samples.append(TraceSample(**values))
    if not header_seen:
        raise TraceError("trace CSV has no header row")
    return BandwidthTrace(tuple(samples))


def synth_trace(profile: str, duration_min: float, seed: int = 0, level: float = 1000) -> BandwidthTrace:
    """Synthetic 4-second bandwidth trace.

    ``rural`` is a mean-reverting log-normal walk around 600 kbps with
    occasional deep fades, clamped to [50, 5000] kbps. ``urban`` is the same
    walk around 2500 kbps clamped to [200, 8000]. ``flat`` repeats ``level``.
    """
    if duration_min < 1:
        raise ValueError("duration must be at least one minute")
    n = math.ceil(duration_min * 60 * 1000 / SAMPLE_INTERVAL_MS)
    times = [i * SAMPLE_INTERVAL_MS for i in range(n)]
    if profile == "flat":
        value = int(level) if float(level).is_integer() else float(level)
        return BandwidthTrace(tuple(TraceSample(t, value) for t in times))
    if profile == "rural":
        centre, lo, hi, fade_p = 600.0, 50, 5000, 0.03
    elif profile == "urban":
        centre, lo, hi, fade_p = 2500.0, 200, 8000, 0.01
    else:
        raise ValueError(f"unknown profile {profile!r}")
    rng = np.random.default_rng(seed)
    x = math.log(centre)
    fade_left = 0
    out = []
    for t in times:
        x += 0.08 * (math.log(centre) - x) + rng.normal(0.0, 0.3)
        value = math.exp(x)
        if fade_left == 0 and rng.random() < fade_p:
            fade_left = int(rng.integers(1, 6))
        if fade_left:
            value *= rng.uniform(0.02, 0.15)
            fade_left -= 1
        out.append(TraceSample(t, int(round(min(hi, max(lo, value))))))
    return BandwidthTrace(tuple(out))


# --------------------------------------------------------------------------
# replay


@dataclass(frozen=True)
class ScriptEvent:
    t_ms: int
    trigger: str


def loads_script(text: str) -> list[ScriptEvent]:
    try:
        obj = json.loads(text)
    except json.JSONDecodeError as exc:
        raise SchemaError(f"event script JSON: {exc.msg} at line {exc.lineno} column {exc.colno}") from exc
    if not isinstance(obj, list):
        raise SchemaError("event script: expected a list of {t_ms, trigger}")
    events = []
    for i, e in enumerate(obj):
        if not isinstance(e, dict) or set(e) != {"t_ms", "trigger"}:
            raise SchemaError(f"event script[{i}]: expected fields t_ms, trigger")
        if isinstance(e["t_ms"], bool) or not isinstance(e["t_ms"], int):
            raise SchemaError(f"event script[{i}].t_ms: expected an integer")
        events.append(ScriptEvent(e["t_ms"], str(e["trigger"])))
    return events


def dumps_script(events: Iterable[ScriptEvent]) -> str:
    return json.dumps([{"t_ms": e.t_ms, "trigger": e.trigger} for e in events], indent=2) + "\n"


@dataclass(frozen=True)
class SimulationRun:
    automaton: ClinicalAutomaton
    trace: BandwidthTrace
    events: tuple[ScriptEvent, ...] = ()
    algorithm: Algorithm = Algorithm.COMPROMISE
    ladder: RateLadder = field(default_factory=lambda: RateLadder(2, 4))
    tuple: PriorityTuple = field(default_factory=lambda: PriorityTuple.of(1, 2, 2))

    @property
    def duration_ms(self) -> int:
        return self.trace.duration_ms


@dataclass(frozen=True)
class TimelineRow:
    t_ms: int
    state_id: str
    w_kbps: Fraction
    status: str  # "ok" or "infeasible"
    shortfall_kbps: Fraction
    plan: AdaptationPlan
    total_kbps: Fraction
    quality: Fraction
    adaptation_ratio: Fraction
    events: tuple[str, ...] = ()
    ignored: tuple[str, ...] = ()

    def to_dict(self) -> dict:
        return {
            "t_ms": self.t_ms,
            "state": self.state_id,
            "w_kbps": format_fraction(self.w_kbps),
            "status": self.status,
            "shortfall_kbps": format_fraction(self.shortfall_kbps),
            "total_kbps": format_fraction(self.total_kbps),
            "quality": format_fraction(self.quality),
            "adaptation_ratio": format_fraction(self.adaptation_ratio),
            "assignment": {str(k): v for k, v in sorted(self.plan.assignment.items())},
            "events": list(self.events),
            "ignored": list(self.ignored),
        }


def _adapt_row(run: SimulationRun, t_ms, state: State, w: Fraction, events, ignored) -> TimelineRow:
    w_min = sum(x.full_bandwidth for x in state.streams) * run.ladder.floor
    instance = AdaptationInstance(state.streams, run.ladder, run.tuple, max(w, w_min))
    if w >= w_min:
        status, shortfall = "ok", Fraction(0)
        plan = adapt.run(run.algorithm, instance)
    else:
        # link too weak for the floor: advise all-floor and record the shortfall
        status, shortfall = "infeasible", w_min - w
        plan = uniform_plan(instance, run.ladder.depth, run.algorithm)
    rep = report(instance, plan)
    return TimelineRow(
        t_ms, state.id, w, status, shortfall, plan, rep.total_bandwidth, rep.total_quality,
        rep.adaptation_ratio, tuple(events), tuple(ignored),
    )


def replay(run: SimulationRun) -> list[TimelineRow]:
    samples = run.trace.samples
    if not samples:
        return []
    events = sorted(run.events, key=lambda e: e.t_ms)  # stable: same-instant events keep script order
    instants = sorted({s.t_ms for s in samples} | {e.t_ms for e in events if e.t_ms >= samples[0].t_ms})
    state = run.automaton.initial
    ei = 0
    si = -1
    # events scripted before the first sample are applied up front
    while ei < len(events) and events[ei].t_ms < samples[0].t_ms:
        state = step_automaton(run.automaton, state, events[ei].trigger)
        ei += 1
    rows = []
    for t in instants:
        while si + 1 < len(samples) and samples[si + 1].t_ms <= t:
            si += 1
        fired, ignored = [], []
        while ei < len(events) and events[ei].t_ms == t:
            trig = events[ei].trigger
            nxt = step_automaton(run.automaton, state, trig)
            (fired if nxt != state else ignored).append(trig)
            state = nxt
            ei += 1
        w = parse_rational(samples[si].kbps)
        rows.append(_adapt_row(run, t, run.automaton.state(state), w, fired, ignored))
    return rows


TIMELINE_FIELDS = (
    "t_ms", "state", "w_kbps", "status", "shortfall_kbps", "total_kbps",
    "quality", "adaptation_ratio", "assignment", "events", "ignored",
)


def dumps_timeline_csv(rows: Sequence[TimelineRow]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(TIMELINE_FIELDS)
    for r in rows:
        d = r.to_dict()
        d["assignment"] = ";".join(f"{k}:{v}" for k, v in d["assignment"].items())
        d["events"] = ";".join(d["events"])
        d["ignored"] = ";".join(d["ignored"])
        w.writerow([d[f] for f in TIMELINE_FIELDS])
    return buf.getvalue()


def dumps_timeline_jsonl(rows: Sequence[TimelineRow]) -> str:
    return "".join(json.dumps(r.to_dict()) + "\n" for r in rows)


@dataclass(frozen=True)
class ReplaySummary:
    rows: int
    infeasible: int
    ignored_events: int
    mean_ratio: Fraction

    @property
    def infeasible_pct(self) -> float:
        return 100.0 * self.infeasible / self.rows if self.rows else 0.0

    def line(self) -> str:
        return (
            f"rows={self.rows} infeasible={self.infeasible_pct:.1f}% "
            f"ignored_events={self.ignored_events} mean_adaptation_ratio={float(self.mean_ratio):.6f}"
        )


def summarize(rows: Sequence[TimelineRow]) -> ReplaySummary:
    if not rows:
        return ReplaySummary(0, 0, 0, Fraction(0))
    return ReplaySummary(
        len(rows),
        sum(r.status == "infeasible" for r in rows),
        sum(len(r.ignored) for r in rows),
        sum((r.adaptation_ratio for r in rows), Fraction(0)) / len(rows),
    )
