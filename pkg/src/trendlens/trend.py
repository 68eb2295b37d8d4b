"""Shared bound-comparison rule used by both harm and exposure trends."""

from __future__ import annotations

import enum


class TrendStatus(str, enum.Enum):
    INCREASING = "INCREASING"
    DECREASING = "DECREASING"
    FLAT = "FLAT"
    DIVERGENT = "DIVERGENT"
    ABSTAIN = "ABSTAIN"

    @property
    def directional(self) -> bool:
        return self in (TrendStatus.INCREASING, TrendStatus.DECREASING, TrendStatus.FLAT)


class Confidence(str, enum.Enum):
    HIGH = "HIGH"
    MEDIUM = "MEDIUM"
    LOW = "LOW"


TIER_CONFIDENCE = {1: Confidence.HIGH, 2: Confidence.MEDIUM, 3: Confidence.LOW, 4: Confidence.LOW}


def _sign(x: float) -> int:
    return (x > 0) - (x < 0)


def compare_bounds(lower1: float, upper1: float, lower2: float, upper2: float) -> TrendStatus:
    """Direction of a bound pair across two periods.

    Both series must move the same way for a directional claim. A flat series
    next to a moving one counts as disagreement (the interval widens or narrows).
    """
    lo, hi = _sign(lower2 - lower1), _sign(upper2 - upper1)
    if lo != hi:
        return TrendStatus.DIVERGENT
    return {1: TrendStatus.INCREASING, -1: TrendStatus.DECREASING, 0: TrendStatus.FLAT}[lo]


def relative_change(before: float, after: float) -> float:
    if before == 0:
        if after == 0:
            return 0.0
        return float("inf") if after > 0 else float("-inf")
    return (after - before) / before
