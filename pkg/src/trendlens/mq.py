"""SORT monitoring questions, observation periods and their config format.

A monitoring question (MQ) reads "Among [S] that [O], how many [R] per [T]?".
The free-text timeframe is only used for rendering; the machine-readable
observation window lives in :class:`PeriodSpec`.
"""

from __future__ import annotations

import calendar
import datetime as dt
import json
import re
from dataclasses import dataclass
from typing import Any, Callable, Mapping, Optional, Tuple

import yaml

from trendlens.errors import Aborted, InsufficientHistory, InvalidPeriodSpec, MalformedConfig, MissingField

SORT_TEMPLATE = "Among {subject} that {opportunity}, how many {risk_event} per {timeframe}?"
FREQUENCIES = ("monthly", "quarterly", "yearly")
_MONTHS_PER = {"monthly": 1, "quarterly": 3, "yearly": 12}


@dataclass(frozen=True, order=True)
class Period:
    """Inclusive calendar date range."""

    start_date: dt.date
    end_date: dt.date

    def __post_init__(self):
        if self.start_date > self.end_date:
            raise InvalidPeriodSpec(f"period starts after it ends: {self.start_date} > {self.end_date}")

    def contains(self, day: dt.date) -> bool:
        return self.start_date <= day <= self.end_date

    @property
    def days(self) -> int:
        return (self.end_date - self.start_date).days + 1

    def label(self) -> str:
        return f"{self.start_date.isoformat()}..{self.end_date.isoformat()}"

    def to_dict(self) -> dict:
        return {"start": self.start_date.isoformat(), "end": self.end_date.isoformat()}

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "Period":
        try:
            return cls(_to_date(data["start"]), _to_date(data["end"]))
        except KeyError as exc:
            raise InvalidPeriodSpec(f"period needs 'start' and 'end', missing {exc.args[0]!r}") from None

    @classmethod
    def parse(cls, text: str) -> "Period":
        """Parse ``YYYY-MM-DD..YYYY-MM-DD``."""
        try:
            start, end = text.split("..")
            return cls(_to_date(start.strip()), _to_date(end.strip()))
        except ValueError:
            raise InvalidPeriodSpec(f"cannot parse period {text!r}; expected START..END") from None


def _to_date(value: Any) -> dt.date:
    if isinstance(value, dt.datetime):
        return value.date()
    if isinstance(value, dt.date):
        return value
    try:
        return dt.date.fromisoformat(str(value).strip())
    except ValueError:
        raise InvalidPeriodSpec(f"not an ISO-8601 date: {value!r}") from None


def _month_index(day: dt.date) -> int:
    return day.year * 12 + (day.month - 1)


def _month_start(index: int) -> dt.date:
    return dt.date(index // 12, index % 12 + 1, 1)


def _month_end(index: int) -> dt.date:
    year, month = index // 12, index % 12 + 1
    return dt.date(year, month, calendar.monthrange(year, month)[1])


def _whole_months(period: Period) -> Optional[int]:
    """Number of calendar months spanned if the period is month-aligned."""
    if period.start_date.day != 1:
        return None
    last = _month_index(period.end_date)
    if period.end_date != _month_end(last):
        return None
    return last - _month_index(period.start_date) + 1


def subtract_months(day: dt.date, months: int) -> dt.date:
    """Shift back by whole months, clamping the day to the target month's length."""
    index = _month_index(day) - months
    if index < 12:  # year 1 is the floor of datetime.date
        raise InsufficientHistory(f"cannot go back {months} months from {day}")
    year, month = index // 12, index % 12 + 1
    return dt.date(year, month, min(day.day, calendar.monthrange(year, month)[1]))


@dataclass(frozen=True)
class PeriodSpec:
    """Either two explicit periods or a cadence with a reporting buffer."""

    explicit_periods: Optional[Tuple[Period, Period]] = None
    frequency: Optional[str] = None
    buffer_months: int = 3

    def __post_init__(self):
        if (self.explicit_periods is None) == (self.frequency is None):
            raise InvalidPeriodSpec("give exactly one of explicit periods or a frequency")
        if self.buffer_months < 0:
            raise InvalidPeriodSpec("buffer_months must be >= 0")
        if self.frequency is not None and self.frequency not in FREQUENCIES:
            raise InvalidPeriodSpec(f"frequency must be one of {FREQUENCIES}, got {self.frequency!r}")
        if self.explicit_periods is not None:
            if len(self.explicit_periods) != 2:
                raise InvalidPeriodSpec("exactly two explicit periods are required")
            first, second = self.explicit_periods
            if first.end_date >= second.start_date:
                raise InvalidPeriodSpec("explicit periods must be chronological and non-overlapping")
            if not _same_length(first, second):
                raise InvalidPeriodSpec("explicit periods must have equal calendar length")

    def to_dict(self) -> dict:
        out: dict = {"buffer_months": self.buffer_months}
        if self.explicit_periods is not None:
            out["periods"] = [p.to_dict() for p in self.explicit_periods]
        else:
            out["frequency"] = self.frequency
        return out


def _same_length(a: Period, b: Period) -> bool:
    # Calendar years differ in days (365 vs 366), so month-aligned spans compare by month count.
    months_a, months_b = _whole_months(a), _whole_months(b)
    if months_a is not None and months_b is not None:
        return months_a == months_b
    return a.days == b.days


@dataclass(frozen=True)
class MonitoringQuestion:
    id: str
    subject: str
    opportunity: str
    risk_event: str
    timeframe_text: str
    timeframe: PeriodSpec
    harm_unit: str
    notes: Optional[str] = None

    def __post_init__(self):
        for name in ("id", "subject", "opportunity", "risk_event", "timeframe_text", "harm_unit"):
            value = getattr(self, name)
            if not isinstance(value, str) or not value.strip():
                raise MissingField(name)

    def render(self) -> str:
        return SORT_TEMPLATE.format(
            subject=self.subject,
            opportunity=self.opportunity,
            risk_event=self.risk_event,
            timeframe=self.timeframe_text,
        )

    def to_dict(self) -> dict:
        timeframe = {"text": self.timeframe_text, **self.timeframe.to_dict()}
        return {
            "id": self.id,
            "subject": self.subject,
            "opportunity": self.opportunity,
            "risk_event": self.risk_event,
            "timeframe": timeframe,
            "harm_unit": self.harm_unit,
            "notes": self.notes,
        }


def serialize(mq: MonitoringQuestion) -> str:
    """Canonical on-disk JSON form."""
    return json.dumps(mq.to_dict(), indent=2, sort_keys=True, ensure_ascii=False) + "\n"


def load_config_text(config_text: str) -> dict:
    """Parse the nested key-value config document (YAML; JSON is accepted as a subset)."""
    try:
        data = yaml.safe_load(config_text)
    except yaml.YAMLError as exc:
        raise MalformedConfig(str(exc)) from None
    if not isinstance(data, dict):
        raise MalformedConfig("config document must be a mapping at the top level")
    return data


def mq_from_dict(data: Mapping[str, Any]) -> MonitoringQuestion:
    for key in ("subject", "opportunity", "risk_event", "timeframe", "harm_unit"):
        value = data.get(key)
        if value is None or (isinstance(value, str) and not value.strip()):
            raise MissingField(key)
    timeframe = data["timeframe"]
    if isinstance(timeframe, str):
        timeframe = {"text": timeframe, "frequency": "yearly"}
    if not isinstance(timeframe, Mapping):
        raise InvalidPeriodSpec("timeframe must be a mapping")
    text = timeframe.get("text")
    if not isinstance(text, str) or not text.strip():
        raise MissingField("timeframe.text")
    spec = period_spec_from_dict(timeframe)
    mq_id = data.get("id") or slugify(str(data["subject"]))
    notes = data.get("notes")
    return MonitoringQuestion(
        id=str(mq_id),
        subject=str(data["subject"]),
        opportunity=str(data["opportunity"]),
        risk_event=str(data["risk_event"]),
        timeframe_text=text,
        timeframe=spec,
        harm_unit=str(data["harm_unit"]),
        notes=None if notes is None else str(notes),
    )


def period_spec_from_dict(data: Mapping[str, Any]) -> PeriodSpec:
    buffer_months = data.get("buffer_months", 3)
    if not isinstance(buffer_months, int) or isinstance(buffer_months, bool):
        raise InvalidPeriodSpec("buffer_months must be an integer")
    periods = data.get("periods")
    if periods is not None:
        if not isinstance(periods, list) or len(periods) != 2:
            raise InvalidPeriodSpec("'periods' must list exactly two periods")
        pair = tuple(Period.from_dict(p) if isinstance(p, Mapping) else Period.parse(str(p)) for p in periods)
        return PeriodSpec(explicit_periods=pair, buffer_months=buffer_months)
    return PeriodSpec(frequency=data.get("frequency"), buffer_months=buffer_months)


def parse_mq(config_text: str) -> MonitoringQuestion:
    """Parse and validate the MQ part of a config document.

    Sections the MQ does not own (``sources``, ``exposure``, ``stub_rules``,
    ``settings``) are ignored here.
    """
    return mq_from_dict(load_config_text(config_text))


def slugify(text: str) -> str:
    slug = re.sub(r"[^a-z0-9]+", "-", text.lower()).strip("-")
    return slug[:48] or "mq"


def _period_containing(day: dt.date, frequency: str) -> Tuple[int, int]:
    """Month-index bounds [first, last] of the calendar period containing ``day``."""
    step = _MONTHS_PER[frequency]
    index = _month_index(day)
    first = index - (index % step)  # month 0 of each year is January, so quarters/years align
    return first, first + step - 1


def derive_periods(spec: PeriodSpec, run_date: dt.date) -> Tuple[Period, Period]:
    """The two most recent complete calendar periods ending on or before
    ``run_date`` minus the reporting buffer, earlier period first."""
    if spec.explicit_periods is not None:
        return spec.explicit_periods
    step = _MONTHS_PER[spec.frequency]
    cutoff = subtract_months(run_date, spec.buffer_months)
    first, last = _period_containing(cutoff, spec.frequency)
    if _month_end(last) > cutoff:
        first, last = first - step, last - step
    if first - step < 12:
        raise InsufficientHistory(f"no two complete {spec.frequency} periods before {cutoff}")
    later = Period(_month_start(first), _month_end(last))
    earlier = Period(_month_start(first - step), _month_end(last - step))
    return earlier, later


WIZARD_STEPS = (
    ("subject", "S - Subject: Who or what is at risk?"),
    ("opportunity", "O - Opportunity: What creates the exposure?"),
    ("risk_event", "R - Risk event: What specific harm?"),
    ("timeframe", "T - Timeframe: Over what period?"),
    ("harm_unit", "Harm unit (e.g. incidents, deaths, affected persons):"),
)


def wizard(
    out_path,
    *,
    mq_id: Optional[str] = None,
    frequency: str = "yearly",
    buffer_months: int = 3,
    ask: Optional[Callable[[str], str]] = None,
    say: Optional[Callable[[str], None]] = None,
) -> MonitoringQuestion:
    """Prompt for the SORT components in order and write a config file.

    Empty answers re-prompt. ``EOFError``/``KeyboardInterrupt`` from ``ask``
    abort without writing anything.
    """
    ask = ask or input
    say = say or print
    answers: dict = {}
    for key, question in WIZARD_STEPS:
        while True:
            try:
                reply = ask(question + " ")
            except (EOFError, KeyboardInterrupt):
                raise Aborted(f"aborted at {key}") from None
            if reply is not None and reply.strip():
                answers[key] = reply.strip()
                break
            say(f"{key} cannot be empty.")
    config = {
        "id": mq_id or slugify(answers["subject"]),
        "subject": answers["subject"],
        "opportunity": answers["opportunity"],
        "risk_event": answers["risk_event"],
        "timeframe": {"text": answers["timeframe"], "frequency": frequency, "buffer_months": buffer_months},
        "harm_unit": answers["harm_unit"],
    }
    text = yaml.safe_dump(config, sort_keys=False, allow_unicode=True)
    mq = parse_mq(text)
    with open(out_path, "w", encoding="utf-8") as fh:
        fh.write(text)
    say(mq.render())
    return mq
