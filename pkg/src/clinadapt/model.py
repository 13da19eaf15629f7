"""Core domain types: streams, the rate ladder, instances, plans and exact accounting.

All bandwidths are integer kbps. Every derived quantity is a ``Fraction`` whose
denominator divides ``c**k``, so budget comparisons never touch floating point.
"""

from __future__ import annotations

import enum
import json
from dataclasses import dataclass, field, replace
from fractions import Fraction
from types import MappingProxyType
from typing import Any, Iterable, Mapping

from clinadapt.priority import PriorityClass, PriorityTuple, classify, global_priority

Rational = Fraction

DEFAULT_MAX_STREAMS = 1024


class AdaptError(Exception):
    """Base class for all domain errors raised by this package."""


class ExponentOutOfRange(AdaptError, ValueError):
    pass


class PlanMismatch(AdaptError, ValueError):
    pass


class MissingPriority(AdaptError, KeyError):
    pass


class InsufficientBudget(AdaptError):
    """Raised when the budget cannot carry every stream at the floor rate."""

    def __init__(self, budget: Fraction, w_min: Fraction):
        self.budget = Fraction(budget)
        self.w_min = Fraction(w_min)
        super().__init__(
            f"budget W={format_number(self.budget)} kbps is below "
            f"W_min={format_number(self.w_min)} kbps"
        )

    @property
    def shortfall(self) -> Fraction:
        return self.w_min - self.budget


class SchemaError(AdaptError, ValueError):
    pass


class Algorithm(str, enum.Enum):
    COMPROMISE = "compromise"
    ROUND_ROBIN = "roundrobin"
    AGGRESSIVE = "aggressive"
    OPTIMAL = "optimal"


@dataclass(frozen=True)
class StreamSpec:
    id: int
    name: str
    full_bandwidth: int
    first_level: bool = False
    second_level: bool = False

    def __post_init__(self):
        if isinstance(self.full_bandwidth, bool) or not isinstance(self.full_bandwidth, int):
            raise SchemaError(f"stream {self.id}: full_bandwidth must be an integer kbps value")
        if self.full_bandwidth < 1:
            raise SchemaError(f"stream {self.id}: full_bandwidth must be >= 1, got {self.full_bandwidth}")
        object.__setattr__(self, "first_level", bool(self.first_level))
        object.__setattr__(self, "second_level", bool(self.second_level))

    @property
    def priority_class(self) -> PriorityClass:
        return classify(self.first_level, self.second_level)


@dataclass(frozen=True)
class RateLadder:
    base: int = 2
    depth: int = 4

    def __post_init__(self):
        if self.base < 2:
            raise SchemaError(f"ladder base c must be >= 2, got {self.base}")
        if self.depth < 1:
            raise SchemaError(f"ladder depth k must be >= 1, got {self.depth}")

    @property
    def floor(self) -> Fraction:
        """R_max, the lowest admissible rate."""
        return Fraction(1, self.base**self.depth)

    @property
    def quanta(self) -> int:
        """Number of 1/c^k-kbps quanta in one kbps."""
        return self.base**self.depth

    def rates(self) -> list[Fraction]:
        return [ladder_rate(self, j) for j in range(self.depth + 1)]


def ladder_rate(ladder: RateLadder, j: int) -> Fraction:
    if not 0 <= j <= ladder.depth:
        raise ExponentOutOfRange(f"exponent {j} outside [0, {ladder.depth}]")
    return Fraction(1, ladder.base**j)


@dataclass(frozen=True)
class AdaptationInstance:
    streams: tuple[StreamSpec, ...]
    ladder: RateLadder
    tuple: PriorityTuple
    budget: Fraction
    max_streams: int = field(default=DEFAULT_MAX_STREAMS, compare=False)

    def __post_init__(self):
        streams = tuple(self.streams)
        object.__setattr__(self, "streams", streams)
        object.__setattr__(self, "budget", Fraction(self.budget))
        if not streams:
            raise SchemaError("instance needs at least one stream")
        if len(streams) > self.max_streams:
            raise SchemaError(f"{len(streams)} streams exceeds the maximum of {self.max_streams}")
        ids = [s.id for s in streams]
        if len(set(ids)) != len(ids):
            raise SchemaError("stream ids must be unique")
        if self.budget <= 0:
            raise SchemaError("budget must be positive")

    @property
    def ids(self) -> list[int]:
        return [s.id for s in self.streams]

    @property
    def total_bandwidth(self) -> int:
        """S, the sum of full bandwidths."""
        return sum(s.full_bandwidth for s in self.streams)

    @property
    def w_min(self) -> Fraction:
        return self.total_bandwidth * self.ladder.floor

    def priority_by_bits(self) -> dict[tuple[bool, bool], Fraction]:
        return {(f, g): global_priority(f, g, self.tuple) for f in (False, True) for g in (False, True)}

    def priorities(self) -> dict[int, Fraction]:
        by_bits = self.priority_by_bits()
        return {s.id: by_bits[s.first_level, s.second_level] for s in self.streams}

    def with_budget(self, budget) -> AdaptationInstance:
        return replace(self, budget=Fraction(budget))

    def with_ladder(self, ladder: RateLadder) -> AdaptationInstance:
        return replace(self, ladder=ladder)

    def with_tuple(self, tuple_: PriorityTuple) -> AdaptationInstance:
        return replace(self, tuple=tuple_)


@dataclass(frozen=True)
class AdaptationPlan:
    assignment: Mapping[int, int]
    algorithm: Algorithm

    def __post_init__(self):
        object.__setattr__(self, "assignment", MappingProxyType(dict(self.assignment)))
        object.__setattr__(self, "algorithm", Algorithm(self.algorithm))

    def __eq__(self, other):
        if not isinstance(other, AdaptationPlan):
            return NotImplemented
        return self.algorithm == other.algorithm and dict(self.assignment) == dict(other.assignment)

    def __hash__(self):
        return hash((self.algorithm, tuple(sorted(self.assignment.items()))))

    def exponent(self, stream_id: int) -> int:
        return self.assignment[stream_id]


def _check_plan(instance: AdaptationInstance, plan: AdaptationPlan) -> None:
    if set(plan.assignment) != set(instance.ids):
        raise PlanMismatch("plan stream ids differ from instance stream ids")
    for sid, j in plan.assignment.items():
        if not 0 <= j <= instance.ladder.depth:
            raise ExponentOutOfRange(f"stream {sid}: exponent {j} outside [0, {instance.ladder.depth}]")


def plan_bandwidth(instance: AdaptationInstance, plan: AdaptationPlan) -> Fraction:
    _check_plan(instance, plan)
    ladder = instance.ladder
    return sum(
        (s.full_bandwidth * ladder_rate(ladder, plan.assignment[s.id]) for s in instance.streams),
        Fraction(0),
    )


def plan_quality(
    instance: AdaptationInstance,
    plan: AdaptationPlan,
    priorities: Mapping[int, Fraction] | None = None,
) -> Fraction:
    """Sum of priority * transmitted bandwidth over all streams."""
    _check_plan(instance, plan)
    if priorities is None:
        priorities = instance.priorities()
    ladder = instance.ladder
    total = Fraction(0)
    for s in instance.streams:
        if s.id not in priorities:
            raise MissingPriority(s.id)
        total += Fraction(priorities[s.id]) * s.full_bandwidth * ladder_rate(ladder, plan.assignment[s.id])
    return total


def full_quality(instance: AdaptationInstance, priorities: Mapping[int, Fraction] | None = None) -> Fraction:
    if priorities is None:
        priorities = instance.priorities()
    return sum((Fraction(priorities[s.id]) * s.full_bandwidth for s in instance.streams), Fraction(0))


def uniform_plan(instance: AdaptationInstance, exponent: int, algorithm=Algorithm.OPTIMAL) -> AdaptationPlan:
    return AdaptationPlan({sid: exponent for sid in instance.ids}, algorithm)


# --------------------------------------------------------------------------
# serialization helpers


def format_fraction(x: Fraction) -> str:
    x = Fraction(x)
    return f"{x.numerator}/{x.denominator}"


def parse_rational(value: Any, what: str = "value") -> Fraction:
    if isinstance(value, bool):
        raise SchemaError(f"{what}: expected a number, got a boolean")
    if isinstance(value, int):
        return Fraction(value)
    if isinstance(value, float):
        return Fraction(repr(value))
    if isinstance(value, str):
        try:
            return Fraction(value.strip())
        except (ValueError, ZeroDivisionError) as exc:
            raise SchemaError(f"{what}: cannot parse {value!r} as a rational") from exc
    raise SchemaError(f"{what}: expected a number, got {type(value).__name__}")


def format_number(x: Fraction) -> int | float | str:
    """JSON value for a rational: int if integral, float if that is exact, else "n/d"."""
    x = Fraction(x)
    if x.denominator == 1:
        return x.numerator
    as_float = float(x)
    if Fraction(repr(as_float)) == x:
        return as_float
    return format_fraction(x)


def decimal_number(x: Fraction) -> int | float:
    x = Fraction(x)
    return x.numerator if x.denominator == 1 else float(x)


_INSTANCE_KEYS = ("c", "k", "tuple", "budget_kbps", "streams")
_STREAM_KEYS = ("id", "name", "kbps", "first", "second")


def _reject_unknown(obj: Mapping, allowed: Iterable[str], where: str) -> None:
    extra = set(obj) - set(allowed)
    if extra:
        raise SchemaError(f"{where}: unknown field(s) {sorted(extra)}")
    missing = [k for k in allowed if k not in obj]
    if missing:
        raise SchemaError(f"{where}: missing field(s) {missing}")


def _int_field(obj: Mapping, key: str, where: str) -> int:
    v = obj[key]
    if isinstance(v, bool) or not isinstance(v, int):
        raise SchemaError(f"{where}.{key}: expected an integer, got {v!r}")
    return v


def _bool_field(obj: Mapping, key: str, where: str) -> bool:
    v = obj[key]
    if isinstance(v, bool):
        return v
    if v in (0, 1) and not isinstance(v, float):
        return bool(v)
    raise SchemaError(f"{where}.{key}: expected a boolean, got {v!r}")


def stream_from_dict(obj: Mapping, where: str = "stream") -> StreamSpec:
    if not isinstance(obj, Mapping):
        raise SchemaError(f"{where}: expected an object")
    _reject_unknown(obj, _STREAM_KEYS, where)
    if not isinstance(obj["name"], str):
        raise SchemaError(f"{where}.name: expected a string")
    return StreamSpec(
        id=_int_field(obj, "id", where),
        name=obj["name"],
        full_bandwidth=_int_field(obj, "kbps", where),
        first_level=_bool_field(obj, "first", where),
        second_level=_bool_field(obj, "second", where),
    )


def stream_to_dict(s: StreamSpec) -> dict:
    return {"id": s.id, "name": s.name, "kbps": s.full_bandwidth, "first": s.first_level, "second": s.second_level}


def instance_from_dict(obj: Mapping, max_streams: int = DEFAULT_MAX_STREAMS) -> AdaptationInstance:
    if not isinstance(obj, Mapping):
        raise SchemaError("instance: expected a JSON object")
    _reject_unknown(obj, _INSTANCE_KEYS, "instance")
    tup = obj["tuple"]
    if not isinstance(tup, list) or len(tup) != 3:
        raise SchemaError("instance.tuple: expected [p0, p1, p2]")
    streams = obj["streams"]
    if not isinstance(streams, list):
        raise SchemaError("instance.streams: expected a list")
    return AdaptationInstance(
        streams=tuple(stream_from_dict(s, f"instance.streams[{i}]") for i, s in enumerate(streams)),
        ladder=RateLadder(_int_field(obj, "c", "instance"), _int_field(obj, "k", "instance")),
        tuple=PriorityTuple(*(parse_rational(p, "instance.tuple") for p in tup)),
        budget=parse_rational(obj["budget_kbps"], "instance.budget_kbps"),
        max_streams=max_streams,
    )


def instance_to_dict(instance: AdaptationInstance) -> dict:
    t = instance.tuple
    return {
        "c": instance.ladder.base,
        "k": instance.ladder.depth,
        "tuple": [format_number(t.p0), format_number(t.p1), format_number(t.p2)],
        "budget_kbps": format_number(instance.budget),
        "streams": [stream_to_dict(s) for s in instance.streams],
    }


def dumps_instance(instance: AdaptationInstance) -> str:
    return json.dumps(instance_to_dict(instance), indent=2) + "\n"


def loads_instance(text: str, max_streams: int = DEFAULT_MAX_STREAMS) -> AdaptationInstance:
    try:
        obj = json.loads(text)
    except json.JSONDecodeError as exc:
        raise SchemaError(f"instance JSON: {exc.msg} at line {exc.lineno} column {exc.colno}") from exc
    return instance_from_dict(obj, max_streams=max_streams)


def plan_to_dict(instance: AdaptationInstance, plan: AdaptationPlan) -> dict:
    _check_plan(instance, plan)
    rows = []
    for s in instance.streams:
        j = plan.assignment[s.id]
        rate = ladder_rate(instance.ladder, j)
        rows.append({"id": s.id, "exponent": j, "rate": format_fraction(rate), "kbps": decimal_number(s.full_bandwidth * rate)})
    return {
        "algorithm": plan.algorithm.value,
        "assignment": rows,
        "total_kbps": decimal_number(plan_bandwidth(instance, plan)),
        "quality": format_fraction(plan_quality(instance, plan)),
    }


def dumps_plan(instance: AdaptationInstance, plan: AdaptationPlan) -> str:
    return json.dumps(plan_to_dict(instance, plan), indent=2) + "\n"


def plan_from_dict(obj: Mapping) -> AdaptationPlan:
    if not isinstance(obj, Mapping):
        raise SchemaError("plan: expected a JSON object")
    _reject_unknown(obj, ("algorithm", "assignment", "total_kbps", "quality"), "plan")
    try:
        algorithm = Algorithm(obj["algorithm"])
    except ValueError as exc:
        raise SchemaError(f"plan.algorithm: unknown algorithm {obj['algorithm']!r}") from exc
    assignment = {}
    for i, row in enumerate(obj["assignment"]):
        where = f"plan.assignment[{i}]"
        _reject_unknown(row, ("id", "exponent", "rate", "kbps"), where)
        sid = _int_field(row, "id", where)
        if sid in assignment:
            raise SchemaError(f"{where}: duplicate stream id {sid}")
        assignment[sid] = _int_field(row, "exponent", where)
    return AdaptationPlan(assignment, algorithm)


def loads_plan(text: str) -> AdaptationPlan:
    try:
        obj = json.loads(text)
    except json.JSONDecodeError as exc:
        raise SchemaError(f"plan JSON: {exc.msg} at line {exc.lineno} column {exc.colno}") from exc
    return plan_from_dict(obj)
