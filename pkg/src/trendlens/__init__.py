"""Trend estimation and trajectory classification for AI incident monitoring."""

__version__ = "0.1.0"

from trendlens.mq import MonitoringQuestion, Period, PeriodSpec, derive_periods, parse_mq
from trendlens.trend import Confidence, TrendStatus
from trendlens.harm import HarmBounds, HarmTrendOutcome, harm_bounds, harm_trend, merge_sources, partition
from trendlens.exposure import (
    ExposureEstimate,
    ExposureTrendOutcome,
    ProxySource,
    combine_proxies,
    exposure_trend,
    oom,
    tier4_check,
)
from trendlens.classify import Category, Direction, TrajectoryResult, annotate, classify, derive_hhat, transition

__all__ = [
    "Category",
    "Confidence",
    "Direction",
    "ExposureEstimate",
    "ExposureTrendOutcome",
    "HarmBounds",
    "HarmTrendOutcome",
    "MonitoringQuestion",
    "Period",
    "PeriodSpec",
    "ProxySource",
    "TrajectoryResult",
    "TrendStatus",
    "annotate",
    "classify",
    "combine_proxies",
    "derive_hhat",
    "derive_periods",
    "exposure_trend",
    "harm_bounds",
    "harm_trend",
    "merge_sources",
    "oom",
    "parse_mq",
    "partition",
    "tier4_check",
    "transition",
]
