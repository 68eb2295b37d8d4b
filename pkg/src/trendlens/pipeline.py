"""Run configuration and the load -> assess -> aggregate -> classify pipeline."""

from __future__ import annotations

import hashlib
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Mapping, Optional, Sequence, Tuple

from trendlens.assessor import Assessment, KeywordRule, RetryPolicy, RunLog, assess_batch
from trendlens.classify import DEFAULT_DEAD_BAND, TrajectoryResult, trajectory
from trendlens.errors import ConfigError, InvalidPeriodSpec, NoSources
from trendlens.exposure import (
    ElicitationRecord,
    ExposureEstimate,
    ExposureTrendOutcome,
    ProxySource,
    combine_proxies,
    exposure_trend,
    load_elicitation,
    load_estimate,
    resolve_divergence,
)
from trendlens.harm import (
    DEFAULT_MIN_FULL,
    DEFAULT_OVERSPEC_RATIO,
    HarmBounds,
    HarmTrendOutcome,
    declared_bounds,
    harm_bounds,
    harm_trend,
    merge_sources,
    partition,
)
from trendlens.ingest import IncidentSet, filter_by_period, load
from trendlens.mq import MonitoringQuestion, Period, load_config_text, mq_from_dict
from trendlens.trend import TrendStatus

logger = logging.getLogger(__name__)

NEWS_DERIVED_FORMATS = {"aiid", "oecd"}


@dataclass(frozen=True)
class Settings:
    min_full: int = DEFAULT_MIN_FULL
    overspec_ratio: float = DEFAULT_OVERSPEC_RATIO
    dead_band: float = DEFAULT_DEAD_BAND
    include_report: bool = False
    max_chars: int = 4000
    concurrency: int = 4
    retry: RetryPolicy = RetryPolicy()

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "Settings":
        retry = data.get("retry") or {}
        return cls(
            min_full=int(data.get("min_full", DEFAULT_MIN_FULL)),
            overspec_ratio=float(data.get("overspec_ratio", DEFAULT_OVERSPEC_RATIO)),
            dead_band=float(data.get("dead_band", DEFAULT_DEAD_BAND)),
            include_report=bool(data.get("include_report", False)),
            max_chars=int(data.get("max_chars", 4000)),
            concurrency=int(data.get("concurrency", 4)),
            retry=RetryPolicy(**retry),
        )

    def to_dict(self) -> dict:
        return {
            "min_full": self.min_full,
            "overspec_ratio": self.overspec_ratio,
            "dead_band": self.dead_band,
            "include_report": self.include_report,
            "max_chars": self.max_chars,
        }


@dataclass(frozen=True)
class SourceSpec:
    """A harm evidence source: an incident database or declared per-period counts."""

    name: str
    kind: str = "database"
    format: Optional[str] = None
    path: Optional[Path] = None
    tier: int = 2
    news_derived: bool = True
    counts: Tuple[Tuple[Period, int, int], ...] = ()
    citation: str = ""

    @classmethod
    def from_dict(cls, data: Mapping[str, Any], base_dir: Path) -> "SourceSpec":
        name = str(data["name"])
        counts = []
        for entry in data.get("counts") or ():
            period = entry["period"]
            period = Period.from_dict(period) if isinstance(period, Mapping) else Period.parse(str(period))
            lower = int(entry["lower"])
            counts.append((period, lower, int(entry.get("upper", lower))))
        kind = "counts" if counts else "database"
        fmt = data.get("format")
        path = data.get("path")
        if kind == "database" and fmt is None:
            fmt = "canonical"
        mandatory = bool(data.get("mandatory_reporting", False))
        tier = int(data.get("tier", 1 if mandatory else 2))
        news_default = kind == "database" and str(fmt).lower() in NEWS_DERIVED_FORMATS
        return cls(
            name=name,
            kind=kind,
            format=fmt,
            path=(base_dir / path) if path else None,
            tier=tier,
            news_derived=bool(data.get("news_derived", news_default)),
            counts=tuple(counts),
            citation=str(data.get("citation", "")),
        )


@dataclass(frozen=True)
class RunConfig:
    mq: MonitoringQuestion
    sources: Tuple[SourceSpec, ...] = ()
    exposure: Tuple[ProxySource, ...] = ()
    exposure_estimates: Tuple[ExposureEstimate, ...] = ()
    stub_rules: Tuple[KeywordRule, ...] = ()
    settings: Settings = Settings()
    elicitation: Optional[ElicitationRecord] = None
    digest: str = ""
    raw: Mapping[str, Any] = field(default_factory=dict, compare=False)


def parse_run_config(text: str, base_dir: Path = Path(".")) -> RunConfig:
    data = load_config_text(text)
    mq = mq_from_dict(data)
    try:
        sources = tuple(SourceSpec.from_dict(s, base_dir) for s in data.get("sources") or ())
        exposure = tuple(ProxySource.from_dict(p) for p in data.get("exposure") or ())
    except KeyError as exc:
        raise ConfigError(f"source or exposure entry missing {exc.args[0]!r}") from None
    estimates = tuple(load_estimate(base_dir / p) for p in data.get("exposure_estimates") or ())
    rules = tuple(KeywordRule.from_dict(r) for r in data.get("stub_rules") or ())
    elicitation = data.get("elicitation")
    return RunConfig(
        mq=mq,
        sources=sources,
        exposure=exposure,
        exposure_estimates=estimates,
        stub_rules=rules,
        settings=Settings.from_dict(data.get("settings") or {}),
        elicitation=load_elicitation(base_dir / elicitation) if elicitation else None,
        digest="sha256:" + hashlib.sha256(text.encode("utf-8")).hexdigest(),
        raw=data,
    )


def load_run_config(path) -> RunConfig:
    path = Path(path)
    return parse_run_config(path.read_text(encoding="utf-8"), path.parent)


@dataclass(frozen=True)
class SourceEvidence:
    source: str
    bounds: Tuple[HarmBounds, HarmBounds]
    outcome: HarmTrendOutcome
    assessments: Tuple[Assessment, ...] = ()
    news_derived: bool = True

    def blocks(self) -> List[dict]:
        return [
            {
                "source": self.source,
                "period": b.period.to_dict(),
                "lower": b.lower,
                "upper": b.upper,
                "full_count": b.full_count,
                "partial_count": b.partial_count,
                "tier": b.tier,
                "confidence": b.confidence.value,
                "status": self.outcome.status.value,
                "growth_rate": self.outcome.to_dict()["growth_rate"],
                "flags": sorted(set(b.flags) | set(self.outcome.flags)),
            }
            for b in self.bounds
        ]


def evaluate_database(name: str, incidents: IncidentSet, mq: MonitoringQuestion,
                      periods: Tuple[Period, Period], backend, settings: Settings = Settings(), *,
                      tier: int = 2, news_derived: bool = True,
                      run_log: Optional[RunLog] = None) -> SourceEvidence:
    """Assess every in-period incident of one database and derive its harm trend."""
    bounds = []
    assessed: List[Assessment] = []
    for period in periods:
        subset = filter_by_period(incidents, period)
        results = assess_batch(
            backend, [mq], list(subset.records), settings.retry, settings.concurrency,
            include_report=settings.include_report, max_chars=settings.max_chars, run_log=run_log,
        )
        assessments = [a for _, a in results]
        assessed.extend(assessments)
        bounds.append(harm_bounds(partition(assessments), period, mq.harm_unit, tier=tier,
                                  min_full=settings.min_full))
    outcome = harm_trend(bounds[0], bounds[1], settings.min_full, settings.overspec_ratio)
    return SourceEvidence(name, (bounds[0], bounds[1]), outcome, tuple(assessed), news_derived)


def evaluate_counts(spec: SourceSpec, periods: Tuple[Period, Period],
                    settings: Settings = Settings()) -> SourceEvidence:
    by_period = {p: (lo, hi) for p, lo, hi in spec.counts}
    bounds = []
    for period in periods:
        if period not in by_period:
            raise InvalidPeriodSpec(f"source {spec.name!r} declares no counts for {period.label()}")
        lo, hi = by_period[period]
        bounds.append(declared_bounds(period, lo, hi, tier=spec.tier, min_full=settings.min_full))
    outcome = harm_trend(bounds[0], bounds[1], settings.min_full, settings.overspec_ratio)
    return SourceEvidence(spec.name, (bounds[0], bounds[1]), outcome, (), spec.news_derived)


@dataclass
class RunResult:
    mq: MonitoringQuestion
    periods: Tuple[Period, Period]
    evidence: List[SourceEvidence]
    harm: HarmTrendOutcome
    exposure_estimates: Optional[Tuple[ExposureEstimate, ExposureEstimate]]
    exposure: ExposureTrendOutcome
    trajectory: TrajectoryResult
    notes: List[str] = field(default_factory=list)


def estimate_exposure(config: RunConfig, periods: Tuple[Period, Period]):
    """Exposure estimates for both periods, or ``None`` with a reason."""
    manual = {e.period: e for e in config.exposure_estimates}
    if not manual and not config.exposure:
        return None, "no exposure proxies configured"
    estimates = []
    for period in periods:
        if period in manual:
            estimates.append(manual[period])
            continue
        try:
            estimates.append(combine_proxies(config.exposure, period))
        except NoSources as exc:
            return None, str(exc)
    return (estimates[0], estimates[1]), ""


def run_pipeline(config: RunConfig, periods: Tuple[Period, Period], databases: Mapping[str, IncidentSet],
                 backend, *, run_log: Optional[RunLog] = None) -> RunResult:
    """Evaluate sources in declared priority order, merge, estimate exposure, classify."""
    settings = config.settings
    evidence: List[SourceEvidence] = []
    notes: List[str] = []
    for spec in config.sources:
        if spec.kind == "counts":
            evidence.append(evaluate_counts(spec, periods, settings))
        elif spec.name in databases:
            evidence.append(evaluate_database(spec.name, databases[spec.name], config.mq, periods, backend,
                                              settings, tier=spec.tier, news_derived=spec.news_derived,
                                              run_log=run_log))
        else:
            notes.append(f"source {spec.name!r} declared but no database supplied")
    declared = {s.name for s in config.sources}
    for name in sorted(set(databases) - declared):
        evidence.append(evaluate_database(name, databases[name], config.mq, periods, backend, settings,
                                          run_log=run_log))
    if not evidence:
        raise NoSources("no harm evidence sources were supplied")
    harm = merge_sources([(e.source, e.outcome) for e in evidence])
    estimates, reason = estimate_exposure(config, periods)
    if estimates is None:
        expo = ExposureTrendOutcome(TrendStatus.ABSTAIN)
        notes.append(f"exposure abstained: {reason}")
    else:
        expo = exposure_trend(*estimates)
        if expo.status is TrendStatus.DIVERGENT and config.elicitation is not None:
            expo = resolve_divergence(expo, config.elicitation)
    tiers = {
        "harm_tier": min((b.tier for e in evidence if e.source == harm.source for b in e.bounds), default=None),
        "exposure_tiers": [e.tier for e in estimates] if estimates else None,
    }
    result = trajectory(harm, expo, settings.dead_band, **tiers)
    return RunResult(config.mq, periods, evidence, harm, estimates, expo, result, notes)


def open_databases(config: RunConfig, extra: Sequence[Tuple[str, str, str]] = ()) -> Dict[str, IncidentSet]:
    """Load config-declared databases plus ``(name, path, format)`` overrides."""
    paths: Dict[str, Tuple[Path, str]] = {}
    for spec in config.sources:
        if spec.kind == "database" and spec.path is not None:
            paths[spec.name] = (spec.path, spec.format or "canonical")
    for name, path, fmt in extra:
        paths[name] = (Path(path), fmt)
    return {name: load(path, fmt) for name, (path, fmt) in sorted(paths.items())}
