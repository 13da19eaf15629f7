"""Priority-aware, bandwidth-compliant rate adaptation for clinical multimedia streams."""

from clinadapt.adapt import aggressive, compromise, floor_check, round_robin, sorted_order
from clinadapt.metrics import class_ratio, report
from clinadapt.model import (
    AdaptationInstance,
    AdaptationPlan,
    Algorithm,
    InsufficientBudget,
    RateLadder,
    StreamSpec,
    ladder_rate,
    plan_bandwidth,
    plan_quality,
)
from clinadapt.oracle import brute_force, dp_exact, fractional_bound
from clinadapt.priority import PriorityClass, PriorityTuple, classify, global_priority

__version__ = "0.1.0"
