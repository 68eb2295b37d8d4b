"""Synthetic surveillance: ground-truth harm thinned by a reporting funnel.

Harm events per period are Poisson with mean hazard * exposure. Each event
survives the six funnel stages independently, so the reporting propensity is
the product of the stage probabilities. Survivors become canonical incident
records whose descriptions carry ``[[truth ...]]`` markers for the stub
assessor.
"""

from __future__ import annotations

import datetime as dt
import hashlib
import json
from collections import Counter
from dataclasses import dataclass, field
from typing import Any, Dict, List, Mapping, Sequence, Tuple, Union

import numpy as np

from trendlens.assessor import StubBackend
from trendlens.classify import DEFAULT_DEAD_BAND, Category, Direction, classify, trajectory
from trendlens.errors import InvalidConfig, WrongPeriodCount
from trendlens.exposure import ExposureEstimate, exposure_trend, oom
from trendlens.ingest import IncidentRecord, IncidentSet, LoadStats, Source
from trendlens.mq import MonitoringQuestion, Period, PeriodSpec
from trendlens.pipeline import Settings, evaluate_database
from trendlens.trend import Confidence, TrendStatus

STAGES = ("detection", "attribution", "recording", "disclosure", "capture", "scope")

StageValue = Union[float, Sequence[float]]


@dataclass(frozen=True)
class GroundTruthConfig:
    """Ground truth for a simulated surveillance stream.

    ``funnel_stages`` maps each of the six stage names to a probability, or
    to one probability per period for non-stationary reporting.
    """

    periods: Tuple[Period, ...]
    exposure_per_period: Tuple[float, ...]
    hazard_per_exposure: Tuple[float, ...]
    funnel_stages: Mapping[str, StageValue] = field(default_factory=lambda: {s: 1.0 for s in STAGES})
    seed: int = 0
    distractors_per_period: int = 0

    def __post_init__(self):
        n = len(self.periods)
        if n == 0:
            raise InvalidConfig("need at least one period")
        if len(self.exposure_per_period) != n or len(self.hazard_per_exposure) != n:
            raise InvalidConfig("periods, exposure and hazard lists must have equal length")
        if any(not e > 0 for e in self.exposure_per_period) or any(not h > 0 for h in self.hazard_per_exposure):
            raise InvalidConfig("exposure and hazard must be positive")
        if set(self.funnel_stages) != set(STAGES):
            raise InvalidConfig(f"funnel_stages must name exactly {STAGES}")
        for stage in STAGES:
            for p in self.stage_probs(stage):
                if not 0 < p <= 1:
                    raise InvalidConfig(f"stage {stage} probability {p} not in (0, 1]")
        for a, b in zip(self.periods, self.periods[1:]):
            if a.end_date >= b.start_date:
                raise InvalidConfig("periods must be chronological and non-overlapping")

    def stage_probs(self, stage: str) -> Tuple[float, ...]:
        value = self.funnel_stages[stage]
        n = len(self.periods)
        if isinstance(value, (int, float)):
            return (float(value),) * n
        values = tuple(float(v) for v in value)
        if len(values) != n:
            raise InvalidConfig(f"stage {stage} needs {n} per-period values")
        return values

    def propensity(self) -> Tuple[float, ...]:
        """Per-period probability an event survives every stage."""
        out = np.ones(len(self.periods))
        for stage in STAGES:
            out *= np.array(self.stage_probs(stage))
        return tuple(float(x) for x in out)

    def expected_counts(self) -> Tuple[float, ...]:
        return tuple(h * e for h, e in zip(self.hazard_per_exposure, self.exposure_per_period))

    def with_seed(self, seed: int) -> "GroundTruthConfig":
        return GroundTruthConfig(self.periods, self.exposure_per_period, self.hazard_per_exposure,
                                 self.funnel_stages, seed, self.distractors_per_period)

    def to_dict(self) -> dict:
        return {
            "periods": [p.to_dict() for p in self.periods],
            "exposure_per_period": list(self.exposure_per_period),
            "hazard_per_exposure": list(self.hazard_per_exposure),
            "funnel_stages": {s: self.funnel_stages[s] if isinstance(self.funnel_stages[s], (int, float))
                              else list(self.funnel_stages[s]) for s in STAGES},
            "seed": self.seed,
            "distractors_per_period": self.distractors_per_period,
        }

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "GroundTruthConfig":
        try:
            stages = data.get("funnel_stages", {s: 1.0 for s in STAGES})
            if isinstance(stages, Sequence) and not isinstance(stages, str):
                stages = dict(zip(STAGES, stages))
            return cls(
                periods=tuple(Period.from_dict(p) for p in data["periods"]),
                exposure_per_period=tuple(float(x) for x in data["exposure_per_period"]),
                hazard_per_exposure=tuple(float(x) for x in data["hazard_per_exposure"]),
                funnel_stages=dict(stages),
                seed=int(data.get("seed", 0)),
                distractors_per_period=int(data.get("distractors_per_period", 0)),
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise InvalidConfig(f"bad ground-truth config: {exc}") from None

    def digest(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True).encode()
        return "sha256:" + hashlib.sha256(blob).hexdigest()


@dataclass(frozen=True)
class SyntheticStream:
    incidents: IncidentSet
    expected_counts: Tuple[float, ...]
    realized_counts: Tuple[int, ...]
    observed_counts: Tuple[int, ...]


def _random_day(rng: np.random.Generator, period: Period) -> dt.date:
    return period.start_date + dt.timedelta(days=int(rng.integers(0, period.days)))


def generate(config: GroundTruthConfig) -> SyntheticStream:
    rng = np.random.Generator(np.random.PCG64(config.seed))
    records: List[IncidentRecord] = []
    realized, observed = [], []
    propensity = config.propensity()
    for t, period in enumerate(config.periods):
        mean = config.hazard_per_exposure[t] * config.exposure_per_period[t]
        n_events = int(rng.poisson(mean))
        survived = int(np.count_nonzero(rng.random(n_events) < propensity[t]))
        realized.append(n_events)
        observed.append(survived)
        for i in range(survived):
            records.append(IncidentRecord(
                incident_id=f"syn-{t}-{i:06d}",
                source=Source.CANONICAL,
                date=_random_day(rng, period),
                title=f"Synthetic harm event {t}-{i}",
                description="Simulated incident. [[truth s=TRUE r=TRUE lower=1 upper=1]]",
            ))
        for i in range(config.distractors_per_period):
            records.append(IncidentRecord(
                incident_id=f"dis-{t}-{i:06d}",
                source=Source.CANONICAL,
                date=_random_day(rng, period),
                title=f"Unrelated incident {t}-{i}",
                description="Simulated out-of-scope incident. [[truth s=FALSE r=TRUE]]",
            ))
    stats = LoadStats(loaded=len(records), reports_joined=0)
    return SyntheticStream(IncidentSet(tuple(records), stats), config.expected_counts(),
                           tuple(realized), tuple(observed))


def _direction(before: float, after: float) -> Direction:
    return Direction.UP if after > before else Direction.DOWN if after < before else Direction.FLAT


def true_directions(config: GroundTruthConfig, dead_band: float = DEFAULT_DEAD_BAND) -> Tuple[Direction, Direction]:
    if len(config.periods) != 2:
        raise WrongPeriodCount(f"need exactly two periods, got {len(config.periods)}")
    e1, e2 = config.exposure_per_period
    h1, h2 = config.expected_counts()
    d = (h2 - h1) / h1 - (e2 - e1) / e1
    hhat = Direction.UP if d > dead_band else Direction.DOWN if d < -dead_band else Direction.FLAT
    return _direction(e1, e2), hhat


def true_category(config: GroundTruthConfig, dead_band: float = DEFAULT_DEAD_BAND) -> Category:
    """Category implied by the configured hazard and exposure, without sampling."""
    return classify(*true_directions(config, dead_band))


def truth_mq(config: GroundTruthConfig) -> MonitoringQuestion:
    return MonitoringQuestion(
        id="synthetic",
        subject="simulated population",
        opportunity="is exposed to the simulated system",
        risk_event="simulated harm events",
        timeframe_text="period",
        timeframe=PeriodSpec(explicit_periods=(config.periods[0], config.periods[1])),
        harm_unit="incidents",
    )


def _truth_exposure(config: GroundTruthConfig, t: int) -> ExposureEstimate:
    value = config.exposure_per_period[t]
    return ExposureEstimate(config.periods[t], value, value, value, oom(value), tier=1,
                            confidence=Confidence.HIGH, assumptions=("ground-truth exposure",))


@dataclass(frozen=True)
class RecoveryReport:
    config_digest: str
    n_runs: int
    true_category: Category
    recovery_rate: float
    abstention_rate: float
    confusion: Dict[str, Dict[str, int]]
    harm_status_counts: Dict[str, int]

    def to_dict(self) -> dict:
        return {
            "config_digest": self.config_digest,
            "n_runs": self.n_runs,
            "true_category": self.true_category.value,
            "recovery_rate": self.recovery_rate,
            "abstention_rate": self.abstention_rate,
            "confusion": self.confusion,
            "harm_status_counts": self.harm_status_counts,
        }


def recovery_experiment(config: GroundTruthConfig, settings: Settings = Settings(), n_runs: int = 200,
                        *, assessor_noise: float = 0.0) -> RecoveryReport:
    """Rerun generate -> assess -> aggregate -> classify on ``n_runs`` seeds.

    Seeds are ``config.seed + i``. Exposure is fed in as the exact ground truth
    (tier 1), so any misclassification comes from harm counting.
    ``assessor_noise`` injects INDETERMINATE subject verdicts; this goes beyond
    the reporting funnel and defaults to off.
    """
    if n_runs < 1:
        raise ValueError("n_runs must be >= 1")
    truth = true_category(config, settings.dead_band)
    mq = truth_mq(config)
    periods = (config.periods[0], config.periods[1])
    expo = exposure_trend(_truth_exposure(config, 0), _truth_exposure(config, 1))
    predicted: Counter = Counter()
    statuses: Counter = Counter()
    serial = Settings(settings.min_full, settings.overspec_ratio, settings.dead_band, concurrency=1)
    for i in range(n_runs):
        run_cfg = config.with_seed(config.seed + i)
        stream = generate(run_cfg)
        backend = StubBackend(noise=assessor_noise, noise_seed=run_cfg.seed, name="synthetic-stub")
        evidence = evaluate_database("synthetic", stream.incidents, mq, periods, backend, serial, tier=2)
        result = trajectory(evidence.outcome, expo, settings.dead_band)
        predicted[result.category] += 1
        statuses[evidence.outcome.status] += 1
    return RecoveryReport(
        config_digest=config.digest(),
        n_runs=n_runs,
        true_category=truth,
        recovery_rate=predicted[truth] / n_runs,
        abstention_rate=statuses[TrendStatus.ABSTAIN] / n_runs,
        confusion={truth.value: {c.value: predicted[c] for c in Category if predicted[c]}},
        harm_status_counts={s.value: statuses[s] for s in TrendStatus if statuses[s]},
    )


def load_config(path) -> GroundTruthConfig:
    with open(path, encoding="utf-8") as fh:
        return GroundTruthConfig.from_dict(json.load(fh))
