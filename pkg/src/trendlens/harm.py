"""Harm aggregation: match partition, per-period bounds and the harm trend."""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import FrozenSet, Iterable, Optional, Sequence, Tuple

from trendlens.assessor import Assessment, Verdict
from trendlens.mq import Period
from trendlens.trend import TIER_CONFIDENCE, Confidence, TrendStatus, compare_bounds, relative_change

OVERSPECIFIED = "OVERSPECIFIED"
MISSING_BOUNDS = "MISSING_BOUNDS"
WIDE_RANGE = "WIDE_RANGE"
ZERO_BASELINE = "ZERO_BASELINE"

DEFAULT_MIN_FULL = 3
DEFAULT_OVERSPEC_RATIO = 5.0


@dataclass(frozen=True)
class MatchPartition:
    full: Tuple[Assessment, ...] = ()
    partial: Tuple[Assessment, ...] = ()
    negative: Tuple[Assessment, ...] = ()


def match_class(a: Assessment) -> str:
    """'full', 'partial' or 'negative'. A FALSE component outranks INDETERMINATE."""
    s, r = a.s_match.value, a.r_match.value
    if s is Verdict.FALSE or r is Verdict.FALSE:
        return "negative"
    if s is Verdict.TRUE and r is Verdict.TRUE:
        return "full"
    return "partial"


def partition(assessments: Iterable[Assessment]) -> MatchPartition:
    groups = {"full": [], "partial": [], "negative": []}
    for a in sorted(assessments, key=lambda a: a.incident_id):
        groups[match_class(a)].append(a)
    return MatchPartition(tuple(groups["full"]), tuple(groups["partial"]), tuple(groups["negative"]))


@dataclass(frozen=True)
class HarmBounds:
    period: Period
    lower: int
    upper: int
    full_count: int
    partial_count: int
    tier: int = 2
    confidence: Confidence = Confidence.MEDIUM
    flags: FrozenSet[str] = frozenset()

    def __post_init__(self):
        if self.lower < 0 or self.lower > self.upper:
            raise ValueError(f"need 0 <= lower <= upper, got ({self.lower}, {self.upper})")
        if self.full_count < 0 or self.partial_count < 0:
            raise ValueError("match counts must be non-negative")
        if self.tier not in (1, 2, 3, 4):
            raise ValueError("tier must be 1..4")

    def to_dict(self) -> dict:
        return {
            "period": self.period.to_dict(),
            "lower": self.lower,
            "upper": self.upper,
            "full_count": self.full_count,
            "partial_count": self.partial_count,
            "tier": self.tier,
            "confidence": self.confidence.value,
            "flags": sorted(self.flags),
        }


def _incident_bounds(a: Assessment, harm_unit: str) -> Tuple[int, int, bool]:
    """Per-incident (lower, upper, missing) with the unit-dependent default."""
    lower, upper = a.harm_lower, a.harm_upper
    if lower is None and upper is None:
        if harm_unit.strip().lower() == "incidents":
            return 1, 1, False
        return 0, 0, True
    if lower is None:
        return 0, upper, True
    if upper is None:
        return lower, lower, True
    return lower, upper, False


def confidence_for(tier: int, full_count: int, min_full: int = DEFAULT_MIN_FULL) -> Confidence:
    base = TIER_CONFIDENCE[tier]
    if base is Confidence.MEDIUM and full_count < 2 * min_full:
        return Confidence.LOW
    return base


def harm_bounds(parts: MatchPartition, period: Period, harm_unit: str = "incidents", *,
                tier: int = 2, min_full: int = DEFAULT_MIN_FULL) -> HarmBounds:
    """Lower = sum over full matches; upper = sum over full and partial matches."""
    flags = set()
    lower = upper = 0
    for a in parts.full:
        lo, hi, missing = _incident_bounds(a, harm_unit)
        lower += lo
        upper += hi
        flags.update({MISSING_BOUNDS} if missing else ())
    for a in parts.partial:
        _, hi, missing = _incident_bounds(a, harm_unit)
        upper += hi
        flags.update({MISSING_BOUNDS} if missing else ())
    if lower > 0 and upper / lower > 100:
        flags.add(WIDE_RANGE)
    return HarmBounds(
        period=period,
        lower=lower,
        upper=upper,
        full_count=len(parts.full),
        partial_count=len(parts.partial),
        tier=tier,
        confidence=confidence_for(tier, len(parts.full), min_full),
        flags=frozenset(flags),
    )


def declared_bounds(period: Period, lower: int, upper: Optional[int] = None, *, tier: int = 2,
                    min_full: int = DEFAULT_MIN_FULL) -> HarmBounds:
    """Bounds copied from a reporting system or proxy count; each counted event is a full match."""
    upper = lower if upper is None else upper
    return HarmBounds(period, lower, upper, full_count=lower, partial_count=0, tier=tier,
                      confidence=confidence_for(tier, lower, min_full))


@dataclass(frozen=True)
class HarmTrendOutcome:
    status: TrendStatus
    growth_rate: Optional[float] = None
    flags: FrozenSet[str] = frozenset()
    source: Optional[str] = None

    def __post_init__(self):
        if (self.growth_rate is not None) != self.status.directional:
            raise ValueError("growth_rate is present iff the status is directional")

    def to_dict(self) -> dict:
        return {
            "status": self.status.value,
            "growth_rate": _json_number(self.growth_rate),
            "flags": sorted(self.flags),
            "source": self.source,
        }


def _json_number(x: Optional[float]):
    if x is None or x == x and abs(x) != float("inf"):
        return x
    return "inf" if x > 0 else "-inf"


def harm_trend(b1: HarmBounds, b2: HarmBounds, min_full: int = DEFAULT_MIN_FULL,
               overspec_ratio: float = DEFAULT_OVERSPEC_RATIO) -> HarmTrendOutcome:
    if b1.period.start_date >= b2.period.start_date:
        raise ValueError("first bounds must cover the earlier period")
    flags = set()
    if any(b.partial_count > overspec_ratio * b.full_count for b in (b1, b2)):
        flags.add(OVERSPECIFIED)
    if b1.full_count < min_full or b2.full_count < min_full:
        return HarmTrendOutcome(TrendStatus.ABSTAIN, None, frozenset(flags))
    status = compare_bounds(b1.lower, b1.upper, b2.lower, b2.upper)
    if not status.directional:
        return HarmTrendOutcome(status, None, frozenset(flags))
    if b1.lower > 0:
        growth = relative_change(b1.lower, b2.lower)
    else:
        # Lower totals can be zero with enough full matches when bounds are missing.
        flags.add(ZERO_BASELINE)
        growth = relative_change(b1.upper, b2.upper)
    return HarmTrendOutcome(status, growth, frozenset(flags))


def merge_sources(outcomes: Sequence[Tuple[str, HarmTrendOutcome]]) -> HarmTrendOutcome:
    """First non-abstaining outcome in the given priority order."""
    if not outcomes:
        raise ValueError("merge_sources needs at least one outcome")
    for source, outcome in outcomes:
        if outcome.status is not TrendStatus.ABSTAIN:
            return replace(outcome, source=source)
    flags = frozenset().union(*(o.flags for _, o in outcomes))
    return HarmTrendOutcome(TrendStatus.ABSTAIN, None, flags, source=None)
