"""Trajectory classification over (exposure direction, harm-per-exposure direction)."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Any, Dict, Optional, Tuple, Union

from trendlens.exposure import ExposureTrendOutcome
from trendlens.harm import HarmTrendOutcome
from trendlens.trend import TrendStatus

DEFAULT_DEAD_BAND = 0.10


class Direction(str, enum.Enum):
    UP = "UP"
    DOWN = "DOWN"
    FLAT = "FLAT"
    UNDETERMINED = "UNDETERMINED"


class Category(str, enum.Enum):
    ESCALATING = "ESCALATING"
    MITIGATING = "MITIGATING"
    CONCENTRATING = "CONCENTRATING"
    RECEDING = "RECEDING"
    UNCLASSIFIABLE = "UNCLASSIFIABLE"


# Report ordering by governance urgency (highest first).
URGENCY_ORDER = (Category.ESCALATING, Category.CONCENTRATING, Category.MITIGATING, Category.RECEDING,
                 Category.UNCLASSIFIABLE)

GUIDANCE = {
    Category.ESCALATING: "Urgent attention",
    Category.MITIGATING: "Monitor closely",
    Category.CONCENTRATING: "Targeted measures",
    Category.RECEDING: "Continue strategy",
    Category.UNCLASSIFIABLE: "Insufficient evidence for a trajectory",
}

_STATUS_DIRECTION = {
    TrendStatus.INCREASING: Direction.UP,
    TrendStatus.DECREASING: Direction.DOWN,
    TrendStatus.FLAT: Direction.FLAT,
}

Outcome = Union[HarmTrendOutcome, ExposureTrendOutcome]


def status_direction(outcome: Outcome) -> Direction:
    return _STATUS_DIRECTION.get(outcome.status, Direction.UNDETERMINED)


def _growth(outcome: Outcome) -> Optional[float]:
    if outcome.status is TrendStatus.FLAT:
        return 0.0
    return outcome.growth_rate


def derive_hhat(harm: HarmTrendOutcome, expo: ExposureTrendOutcome,
                dead_band: float = DEFAULT_DEAD_BAND) -> Direction:
    """Direction of harm per unit exposure from which trend grows faster.

    Only the growth-rate difference matters; bound series are never divided
    pointwise. When a direction came from expert elicitation (no magnitude),
    opposite or one-sided movements still decide the answer but same-direction
    movements are undetermined.
    """
    h_dir, e_dir = status_direction(harm), status_direction(expo)
    if Direction.UNDETERMINED in (h_dir, e_dir):
        return Direction.UNDETERMINED
    hg, eg = _growth(harm), _growth(expo)
    if hg is None or eg is None:
        order = {Direction.DOWN: -1, Direction.FLAT: 0, Direction.UP: 1}
        diff = order[h_dir] - order[e_dir]
        if h_dir == e_dir and h_dir is not Direction.FLAT:
            return Direction.UNDETERMINED
        return Direction.UP if diff > 0 else Direction.DOWN if diff < 0 else Direction.FLAT
    if math.isinf(hg) and math.isinf(eg):
        return Direction.UNDETERMINED if hg == eg else (Direction.UP if hg > eg else Direction.DOWN)
    d = hg - eg
    if d > dead_band:
        return Direction.UP
    if d < -dead_band:
        return Direction.DOWN
    return Direction.FLAT


_GRID: Dict[Tuple[Direction, Direction], Category] = {
    (Direction.UP, Direction.UP): Category.ESCALATING,
    (Direction.UP, Direction.FLAT): Category.ESCALATING,
    (Direction.UP, Direction.DOWN): Category.MITIGATING,
    (Direction.FLAT, Direction.DOWN): Category.MITIGATING,
    (Direction.FLAT, Direction.UP): Category.CONCENTRATING,
    (Direction.DOWN, Direction.UP): Category.CONCENTRATING,
    (Direction.DOWN, Direction.DOWN): Category.RECEDING,
    (Direction.DOWN, Direction.FLAT): Category.RECEDING,
    (Direction.FLAT, Direction.FLAT): Category.RECEDING,
}


def classify(e_dir: Direction, hhat_dir: Direction) -> Category:
    return _GRID.get((Direction(e_dir), Direction(hhat_dir)), Category.UNCLASSIFIABLE)


@dataclass(frozen=True)
class TrajectoryResult:
    category: Category
    e_direction: Direction
    hhat_direction: Direction
    absolute_harm_warning: bool = False
    evidence: Dict[str, Any] = field(default_factory=dict, compare=False)

    def __post_init__(self):
        undetermined = Direction.UNDETERMINED in (self.e_direction, self.hhat_direction)
        if (self.category is Category.UNCLASSIFIABLE) != undetermined:
            raise ValueError("category is UNCLASSIFIABLE exactly when a direction is UNDETERMINED")

    @property
    def qualifier(self) -> Optional[str]:
        if self.e_direction is Direction.FLAT and self.hhat_direction is Direction.FLAT:
            return "stable"
        return None

    def to_dict(self) -> dict:
        return {
            "category": self.category.value,
            "e_direction": self.e_direction.value,
            "hhat_direction": self.hhat_direction.value,
            "absolute_harm_warning": self.absolute_harm_warning,
            "qualifier": self.qualifier,
            "evidence": self.evidence,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "TrajectoryResult":
        return cls(
            category=Category(data["category"]),
            e_direction=Direction(data["e_direction"]),
            hhat_direction=Direction(data["hhat_direction"]),
            absolute_harm_warning=bool(data.get("absolute_harm_warning", False)),
            evidence=dict(data.get("evidence") or {}),
        )


def trajectory(harm: HarmTrendOutcome, expo: ExposureTrendOutcome,
               dead_band: float = DEFAULT_DEAD_BAND, **evidence: Any) -> TrajectoryResult:
    """Derive both directions, classify and annotate in one step."""
    e_dir = status_direction(expo)
    h_dir = derive_hhat(harm, expo, dead_band)
    result = TrajectoryResult(classify(e_dir, h_dir), e_dir, h_dir)
    return annotate(result, harm, expo, dead_band=dead_band, **evidence)


def annotate(result: TrajectoryResult, harm: HarmTrendOutcome, expo: ExposureTrendOutcome,
             **extra: Any) -> TrajectoryResult:
    warning = result.category is Category.MITIGATING and harm.status is TrendStatus.INCREASING
    evidence = {
        "harm": harm.to_dict(),
        "exposure": expo.to_dict(),
        "harm_growth": harm.to_dict()["growth_rate"],
        "exposure_growth": expo.growth_rate,
        **extra,
    }
    return TrajectoryResult(result.category, result.e_direction, result.hhat_direction, warning, evidence)


@dataclass(frozen=True)
class Transition:
    previous: Category
    current: Category
    interpretation: str

    def to_dict(self) -> dict:
        return {"from": self.previous.value, "to": self.current.value, "interpretation": self.interpretation}


_INTERPRETATIONS = {
    (Category.ESCALATING, Category.MITIGATING): "possible successful intervention",
    (Category.RECEDING, Category.CONCENTRATING): "deepening harm within a subpopulation",
}


def transition(prev: TrajectoryResult, curr: TrajectoryResult) -> Transition:
    if Category.UNCLASSIFIABLE in (prev.category, curr.category):
        return Transition(prev.category, curr.category, "UNKNOWN")
    if prev.category is curr.category:
        return Transition(prev.category, curr.category, "stable")
    label = _INTERPRETATIONS.get((prev.category, curr.category), "category change")
    return Transition(prev.category, curr.category, label)


_ARROWS = {Direction.UP: "↑", Direction.DOWN: "↓", Direction.FLAT: "→", Direction.UNDETERMINED: "?"}


def classbox(result: TrajectoryResult) -> str:
    """Markdown block mirroring a case-study classification box."""
    name = result.category.value.capitalize()
    lines = [
        f"> **Classification: *{name}*.**"
        + (f" ({result.qualifier})" if result.qualifier else ""),
        f"> Exposure trend E{_ARROWS[result.e_direction]}, harm-per-exposure trend "
        f"Ĥ{_ARROWS[result.hhat_direction]}. {GUIDANCE[result.category]}.",
    ]
    if result.absolute_harm_warning:
        lines.append("> Absolute harm is still rising and warrants continued monitoring.")
    return "\n".join(lines)
