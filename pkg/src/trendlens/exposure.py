"""Exposure estimates built from proxy sources, and the exposure trend."""

from __future__ import annotations

import datetime as dt
import enum
import json
import math
from dataclasses import dataclass
from typing import Any, Iterable, Mapping, Optional, Tuple

from trendlens.errors import BoundsCrossed, InvalidBounds, NoSources, NonPositive, NotDivergent
from trendlens.mq import Period
from trendlens.trend import TIER_CONFIDENCE, Confidence, TrendStatus, compare_bounds, relative_change

MAX_RANGE_RATIO = 100.0


class Role(str, enum.Enum):
    LOWER = "LOWER"
    UPPER = "UPPER"
    POINT_COMPONENT = "POINT_COMPONENT"


@dataclass(frozen=True)
class ProxySource:
    name: str
    period: Period
    value: float
    role: Role
    share_adjustment: Optional[float] = None
    citation: str = ""
    authoritative: bool = False

    def __post_init__(self):
        if not self.value > 0:
            raise NonPositive(f"proxy {self.name!r} value must be positive")
        if self.share_adjustment is not None and not 0 < self.share_adjustment <= 1:
            raise ValueError(f"proxy {self.name!r} share_adjustment must be in (0, 1]")

    @property
    def adjusted(self) -> float:
        return self.value / self.share_adjustment if self.share_adjustment else self.value

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "ProxySource":
        period = data["period"]
        return cls(
            name=str(data["name"]),
            period=Period.from_dict(period) if isinstance(period, Mapping) else Period.parse(str(period)),
            value=float(data["value"]),
            role=Role(str(data.get("role", "POINT_COMPONENT")).upper()),
            share_adjustment=None if data.get("share_adjustment") is None else float(data["share_adjustment"]),
            citation=str(data.get("citation", "")),
            authoritative=bool(data.get("authoritative", False)),
        )

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "period": self.period.to_dict(),
            "value": self.value,
            "role": self.role.value,
            "share_adjustment": self.share_adjustment,
            "citation": self.citation,
            "authoritative": self.authoritative,
        }


def round_half_up(x: float) -> int:
    return math.floor(x + 0.5)


def oom(point: float) -> int:
    """Nearest power of ten, rounding half up on the log scale (88e6 -> 8)."""
    if not point > 0:
        raise NonPositive(f"order of magnitude needs a positive value, got {point}")
    return round_half_up(math.log10(point))


class RangeCheck(str, enum.Enum):
    OK = "OK"
    ABSTAIN = "ABSTAIN"


def tier4_check(low: float, high: float) -> RangeCheck:
    """ABSTAIN when the plausible range spans more than two orders of magnitude."""
    if not (0 < low <= high):
        raise InvalidBounds(f"need 0 < low <= high, got ({low}, {high})")
    return RangeCheck.ABSTAIN if high / low > MAX_RANGE_RATIO else RangeCheck.OK


@dataclass(frozen=True)
class ExposureEstimate:
    period: Period
    point: float
    low: float
    high: float
    oom: int
    tier: int = 2
    confidence: Confidence = Confidence.MEDIUM
    assumptions: Tuple[str, ...] = ()

    def __post_init__(self):
        if not (0 < self.low <= self.point <= self.high):
            raise BoundsCrossed(f"need 0 < low <= point <= high, got ({self.low}, {self.point}, {self.high})")
        if self.oom != oom(self.point):
            raise ValueError(f"oom {self.oom} inconsistent with point {self.point}")
        if self.tier not in (1, 2, 3, 4):
            raise ValueError("tier must be 1..4")

    def to_dict(self) -> dict:
        return {
            "period": self.period.to_dict(),
            "point": self.point,
            "low": self.low,
            "high": self.high,
            "oom": self.oom,
            "tier": self.tier,
            "confidence": self.confidence.value,
            "assumptions": list(self.assumptions),
        }

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "ExposureEstimate":
        point = float(data["point"])
        tier = int(data.get("tier", 3))
        return cls(
            period=Period.from_dict(data["period"]),
            point=point,
            low=float(data["low"]),
            high=float(data["high"]),
            oom=oom(point),
            tier=tier,
            confidence=Confidence(data.get("confidence", TIER_CONFIDENCE[tier].value)),
            assumptions=tuple(data.get("assumptions", ())),
        )


def load_estimate(path) -> ExposureEstimate:
    """Read a hand-authored estimate file (tier 3 expert ranges use this path)."""
    with open(path, encoding="utf-8") as fh:
        return ExposureEstimate.from_dict(json.load(fh))


def _assumption(src: ProxySource) -> str:
    text = f"{src.name} ({src.role.value}) = {src.value:g}"
    if src.share_adjustment:
        text += f" / share {src.share_adjustment:g} = {src.adjusted:g}"
    if src.citation:
        text += f" [{src.citation}]"
    return text


def combine_proxies(sources: Iterable[ProxySource], period: Period) -> ExposureEstimate:
    """Combine the proxies declared for ``period``.

    The point is the midpoint of the share-adjusted point components. Bounds
    come from explicit LOWER/UPPER proxies (most conservative one wins) or,
    failing that, the extremes of the point components. Ranges wider than two
    orders of magnitude are demoted to tier 4.
    """
    mine = [s for s in sources if s.period == period]
    components = sorted(s.adjusted for s in mine if s.role is Role.POINT_COMPONENT)
    if not components:
        raise NoSources(f"no POINT_COMPONENT proxy for {period.label()}")
    point = (components[0] + components[-1]) / 2
    lowers = [s.adjusted for s in mine if s.role is Role.LOWER]
    uppers = [s.adjusted for s in mine if s.role is Role.UPPER]
    low = min(lowers) if lowers else components[0]
    high = max(uppers) if uppers else components[-1]
    if low > high:
        raise BoundsCrossed(f"lower proxy {low:g} exceeds upper proxy {high:g} for {period.label()}")
    if not low <= point <= high:
        raise BoundsCrossed(f"point {point:g} outside [{low:g}, {high:g}] for {period.label()}")
    tier = 1 if any(s.authoritative for s in mine) else 2
    assumptions = [_assumption(s) for s in mine]
    if len(components) > 1:
        assumptions.append("point = midpoint of share-adjusted components")
    if tier4_check(low, high) is RangeCheck.ABSTAIN:
        tier = 4
        assumptions.append("range spans more than two orders of magnitude; excluded from trend")
    return ExposureEstimate(
        period=period,
        point=point,
        low=low,
        high=high,
        oom=oom(point),
        tier=tier,
        confidence=TIER_CONFIDENCE[tier],
        assumptions=tuple(assumptions),
    )


class ElicitedDirection(str, enum.Enum):
    INCREASING = "INCREASING"
    DECREASING = "DECREASING"
    NO_CONVERGENCE = "NO_CONVERGENCE"


@dataclass(frozen=True)
class ElicitationRecord:
    expert_panel: str
    direction: ElicitedDirection
    rationale: str
    date: dt.date

    def __post_init__(self):
        if not self.rationale.strip():
            raise ValueError("elicitation rationale must be non-empty")

    def to_dict(self) -> dict:
        return {
            "expert_panel": self.expert_panel,
            "direction": self.direction.value,
            "rationale": self.rationale,
            "date": self.date.isoformat(),
        }

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "ElicitationRecord":
        return cls(
            expert_panel=str(data["expert_panel"]),
            direction=ElicitedDirection(str(data["direction"]).upper()),
            rationale=str(data["rationale"]),
            date=dt.date.fromisoformat(str(data["date"])),
        )


def load_elicitation(path) -> ElicitationRecord:
    with open(path, encoding="utf-8") as fh:
        return ElicitationRecord.from_dict(json.load(fh))


@dataclass(frozen=True)
class ExposureTrendOutcome:
    status: TrendStatus
    growth_rate: Optional[float] = None
    resolved_by: Optional[ElicitationRecord] = None

    def to_dict(self) -> dict:
        return {
            "status": self.status.value,
            "growth_rate": self.growth_rate,
            "resolved_by": self.resolved_by.to_dict() if self.resolved_by else None,
        }


def exposure_trend(e1: ExposureEstimate, e2: ExposureEstimate) -> ExposureTrendOutcome:
    if e1.tier == 4 or e2.tier == 4:
        return ExposureTrendOutcome(TrendStatus.ABSTAIN)
    if tier4_check(e1.low, e1.high) is RangeCheck.ABSTAIN or tier4_check(e2.low, e2.high) is RangeCheck.ABSTAIN:
        return ExposureTrendOutcome(TrendStatus.ABSTAIN)
    status = compare_bounds(e1.low, e1.high, e2.low, e2.high)
    growth = relative_change(e1.point, e2.point) if status.directional else None
    return ExposureTrendOutcome(status, growth)


def resolve_divergence(outcome: ExposureTrendOutcome, record: ElicitationRecord) -> ExposureTrendOutcome:
    """Settle a divergent trend with an external expert judgment.

    Magnitude is unknown after elicitation, so the growth rate stays empty.
    """
    if outcome.status is not TrendStatus.DIVERGENT:
        raise NotDivergent(f"only DIVERGENT outcomes can be resolved, got {outcome.status.value}")
    if record.direction is ElicitedDirection.NO_CONVERGENCE:
        return ExposureTrendOutcome(TrendStatus.ABSTAIN, None, record)
    return ExposureTrendOutcome(TrendStatus(record.direction.value), None, record)
