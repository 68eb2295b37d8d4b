"""Loaders that normalise incident-database exports into canonical records.

Column mapping (case-insensitive; the first alias present wins):

=================  ==========================================================
field              accepted column names
=================  ==========================================================
incident_id        incident_id, id, incident id
date               date, incident_date, date_published
title              title, name, headline
description        description, summary, abstract
deployers          alleged deployer of ai system, deployers, deployer
developers         alleged developer of ai system, developers, developer
harmed_parties     alleged harmed or nearly harmed parties, harmed_parties
report_id          report_id, report_number
report text        text, plain_text, content
report url         url, source_url
=================  ==========================================================

AIID snapshots are a directory with ``incidents.csv`` and ``reports.csv``.
OECD AIM exports are a single CSV; ``harm_type``/``country`` and any other
columns are kept in ``IncidentRecord.attributes``. Canonical files are
JSON-lines, one :class:`IncidentRecord` per line.
"""

from __future__ import annotations

import csv
import datetime as dt
import enum
import json
import logging
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any, Dict, Iterable, List, Mapping, Optional, Tuple

from trendlens.errors import EmptySnapshot, SchemaMismatch
from trendlens.mq import Period

logger = logging.getLogger(__name__)

DEFAULT_MAX_CHARS = 4000

_ALIASES = {
    "incident_id": ("incident_id", "id", "incident id"),
    "date": ("date", "incident_date", "date_published"),
    "title": ("title", "name", "headline"),
    "description": ("description", "summary", "abstract"),
    "deployers": ("alleged deployer of ai system", "alleged_deployer_of_ai_system", "deployers", "deployer"),
    "developers": ("alleged developer of ai system", "alleged_developer_of_ai_system", "developers", "developer"),
    "harmed_parties": (
        "alleged harmed or nearly harmed parties",
        "alleged_harmed_or_nearly_harmed_parties",
        "harmed_parties",
        "harmed parties",
    ),
    "report_id": ("report_id", "report_number", "_id"),
    "text": ("text", "plain_text", "content"),
    "url": ("url", "source_url"),
}

_DATE_FORMATS = ("%Y-%m-%d", "%Y/%m/%d", "%m/%d/%Y", "%d.%m.%Y", "%Y-%m")


class Source(str, enum.Enum):
    AIID = "AIID"
    OECD_AIM = "OECD_AIM"
    CANONICAL = "CANONICAL"


@dataclass(frozen=True)
class ReportRef:
    report_id: str
    text: str = ""
    url: Optional[str] = None


@dataclass(frozen=True)
class IncidentRecord:
    incident_id: str
    source: Source
    date: dt.date
    title: str
    description: str
    deployers: Tuple[str, ...] = ()
    developers: Tuple[str, ...] = ()
    harmed_parties: Tuple[str, ...] = ()
    reports: Tuple[ReportRef, ...] = ()
    attributes: Tuple[Tuple[str, str], ...] = ()

    def to_dict(self) -> dict:
        return {
            "incident_id": self.incident_id,
            "source": self.source.value,
            "date": self.date.isoformat(),
            "title": self.title,
            "description": self.description,
            "deployers": list(self.deployers),
            "developers": list(self.developers),
            "harmed_parties": list(self.harmed_parties),
            "reports": [{"report_id": r.report_id, "text": r.text, "url": r.url} for r in self.reports],
            "attributes": dict(self.attributes),
        }

    @classmethod
    def from_dict(cls, data: Mapping[str, Any], source: Optional[Source] = None) -> "IncidentRecord":
        return cls(
            incident_id=str(data["incident_id"]),
            source=source or Source(data.get("source", "CANONICAL")),
            date=parse_date(data["date"]),
            title=str(data.get("title") or ""),
            description=str(data.get("description") or ""),
            deployers=tuple(data.get("deployers") or ()),
            developers=tuple(data.get("developers") or ()),
            harmed_parties=tuple(data.get("harmed_parties") or ()),
            reports=tuple(
                ReportRef(str(r.get("report_id", "")), str(r.get("text") or ""), r.get("url"))
                for r in data.get("reports") or ()
            ),
            attributes=tuple(sorted((str(k), str(v)) for k, v in (data.get("attributes") or {}).items())),
        )


@dataclass(frozen=True)
class LoadStats:
    loaded: int = 0
    quarantined: int = 0
    duplicate_ids: int = 0
    reports_joined: int = 0


@dataclass(frozen=True)
class IncidentSet:
    records: Tuple[IncidentRecord, ...]
    load_stats: LoadStats
    quarantined: Tuple[Mapping[str, Any], ...] = field(default=(), compare=False)

    def __len__(self) -> int:
        return len(self.records)

    def by_id(self) -> Dict[str, IncidentRecord]:
        return {r.incident_id: r for r in self.records}

    def canonical_order(self) -> "IncidentSet":
        return replace(self, records=tuple(sorted(self.records, key=lambda r: r.incident_id)))


@dataclass(frozen=True)
class AssessmentContext:
    incident_id: str
    title: str
    description: str
    deployers: Tuple[str, ...] = ()
    developers: Tuple[str, ...] = ()
    harmed_parties: Tuple[str, ...] = ()
    report_excerpt: Optional[str] = None


def parse_date(value: Any) -> dt.date:
    if isinstance(value, dt.datetime):
        return value.date()
    if isinstance(value, dt.date):
        return value
    text = str(value).strip()
    if not text:
        raise ValueError("blank date")
    try:
        return dt.date.fromisoformat(text[:10])
    except ValueError:
        pass
    for fmt in _DATE_FORMATS:
        try:
            return dt.datetime.strptime(text, fmt).date()
        except ValueError:
            continue
    raise ValueError(f"unparseable date {text!r}")


def _split_parties(value: Any) -> Tuple[str, ...]:
    if value is None:
        return ()
    if isinstance(value, (list, tuple)):
        return tuple(str(v).strip() for v in value if str(v).strip())
    text = str(value).strip()
    if not text:
        return ()
    if text.startswith("["):
        try:
            parsed = json.loads(text)
            if isinstance(parsed, list):
                return tuple(str(v).strip() for v in parsed if str(v).strip())
        except json.JSONDecodeError:
            text = text.strip("[]").replace("'", "").replace('"', "")
    sep = ";" if ";" in text else ","
    return tuple(part.strip() for part in text.split(sep) if part.strip())


def _resolve_columns(header: Iterable[str], required: Iterable[str], table: str) -> Dict[str, str]:
    lowered = {h.strip().lower(): h for h in header if h is not None}
    mapping: Dict[str, str] = {}
    for name, aliases in _ALIASES.items():
        for alias in aliases:
            if alias in lowered:
                mapping[name] = lowered[alias]
                break
    for name in required:
        if name not in mapping:
            raise SchemaMismatch(name, table)
    return mapping


def _read_csv(path: Path) -> Tuple[List[str], List[Dict[str, str]]]:
    with open(path, newline="", encoding="utf-8-sig") as fh:
        reader = csv.DictReader(fh)
        rows = list(reader)
        return list(reader.fieldnames or []), rows


def _build_set(rows: Iterable[Tuple[Mapping[str, Any], Optional[IncidentRecord]]]) -> IncidentSet:
    """Deduplicate (first occurrence wins) and count quarantined rows."""
    records: Dict[str, IncidentRecord] = {}
    quarantined: List[Mapping[str, Any]] = []
    duplicates = 0
    for raw, record in rows:
        if record is None:
            quarantined.append(dict(raw))
            continue
        if record.incident_id in records:
            duplicates += 1
            continue
        records[record.incident_id] = record
    ordered = tuple(records.values())
    stats = LoadStats(
        loaded=len(ordered),
        quarantined=len(quarantined),
        duplicate_ids=duplicates,
        reports_joined=sum(len(r.reports) for r in ordered),
    )
    if quarantined:
        logger.warning("quarantined %d rows with unparseable dates", len(quarantined))
    return IncidentSet(ordered, stats, tuple(quarantined))


def _record_from_row(row: Mapping[str, str], cols: Mapping[str, str], source: Source,
                     reports: Tuple[ReportRef, ...] = (), keep_extra: bool = False) -> Optional[IncidentRecord]:
    try:
        day = parse_date(row.get(cols["date"], ""))
    except ValueError:
        return None
    extra: Tuple[Tuple[str, str], ...] = ()
    if keep_extra:
        used = set(cols.values())
        extra = tuple(sorted((k.strip().lower(), (v or "").strip()) for k, v in row.items() if k and k not in used))
    return IncidentRecord(
        incident_id=str(row[cols["incident_id"]]).strip(),
        source=source,
        date=day,
        title=(row.get(cols.get("title", ""), "") or "").strip(),
        description=(row.get(cols.get("description", ""), "") or "").strip(),
        deployers=_split_parties(row.get(cols.get("deployers", ""))),
        developers=_split_parties(row.get(cols.get("developers", ""))),
        harmed_parties=_split_parties(row.get(cols.get("harmed_parties", ""))),
        reports=reports,
        attributes=extra,
    )


def load_aiid(snapshot_path) -> IncidentSet:
    """Load an AIID snapshot directory (``incidents.csv`` + ``reports.csv``).

    Reports are joined on ``incident_id`` and kept in report-id order.
    """
    root = Path(snapshot_path)
    incidents_path, reports_path = root / "incidents.csv", root / "reports.csv"
    for p in (incidents_path, reports_path):
        if not p.exists():
            raise FileNotFoundError(str(p))
    header, rows = _read_csv(incidents_path)
    cols = _resolve_columns(header, ("incident_id", "date", "title", "description"), "incidents")
    if not rows:
        raise EmptySnapshot(f"{incidents_path} has no incident rows")
    rheader, rrows = _read_csv(reports_path)
    rcols = _resolve_columns(rheader, ("report_id", "incident_id", "text"), "reports")
    by_incident: Dict[str, List[ReportRef]] = {}
    for r in rrows:
        ref = ReportRef(
            report_id=str(r[rcols["report_id"]]).strip(),
            text=r.get(rcols["text"]) or "",
            url=(r.get(rcols["url"]) or None) if "url" in rcols else None,
        )
        by_incident.setdefault(str(r[rcols["incident_id"]]).strip(), []).append(ref)
    for refs in by_incident.values():
        refs.sort(key=_report_sort_key)

    def build():
        for row in rows:
            reports = tuple(by_incident.get(str(row[cols["incident_id"]]).strip(), ()))
            yield row, _record_from_row(row, cols, Source.AIID, reports)

    return _build_set(build())


def _report_sort_key(ref: ReportRef):
    return (0, int(ref.report_id)) if ref.report_id.isdigit() else (1, ref.report_id)


def load_oecd(export_path) -> IncidentSet:
    path = Path(export_path)
    if not path.exists():
        raise FileNotFoundError(str(path))
    header, rows = _read_csv(path)
    cols = _resolve_columns(header, ("incident_id", "date", "title", "description"), "oecd export")
    if not rows:
        raise EmptySnapshot(f"{path} has no rows")
    return _build_set((row, _record_from_row(row, cols, Source.OECD_AIM, keep_extra=True)) for row in rows)


def load_canonical(path) -> IncidentSet:
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(str(path))

    def build():
        with open(path, encoding="utf-8") as fh:
            for line in fh:
                if not line.strip():
                    continue
                raw = json.loads(line)
                if "incident_id" not in raw:
                    raise SchemaMismatch("incident_id", "canonical")
                try:
                    yield raw, IncidentRecord.from_dict(raw, Source.CANONICAL)
                except (ValueError, KeyError):
                    yield raw, None

    result = _build_set(build())
    if not result.records and not result.quarantined:
        raise EmptySnapshot(f"{path} has no records")
    return result


def write_canonical(records: Iterable[IncidentRecord], path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for record in records:
            fh.write(json.dumps(record.to_dict(), sort_keys=True, ensure_ascii=False) + "\n")


LOADERS = {"aiid": load_aiid, "oecd": load_oecd, "canonical": load_canonical}


def load(path, fmt: str) -> IncidentSet:
    try:
        loader = LOADERS[fmt.lower()]
    except KeyError:
        raise ValueError(f"unknown database format {fmt!r}; expected one of {sorted(LOADERS)}") from None
    return loader(path)


def attach_context(record: IncidentRecord, include_report: bool = False,
                   max_chars: int = DEFAULT_MAX_CHARS) -> AssessmentContext:
    excerpt = None
    if include_report:
        for report in record.reports:
            if report.text and report.text.strip():
                excerpt = report.text[:max_chars]
                break
    return AssessmentContext(
        incident_id=record.incident_id,
        title=record.title,
        description=record.description,
        deployers=record.deployers,
        developers=record.developers,
        harmed_parties=record.harmed_parties,
        report_excerpt=excerpt,
    )


def filter_by_period(incidents: IncidentSet, period: Period) -> IncidentSet:
    kept = tuple(r for r in incidents.records if period.contains(r.date))
    stats = replace(incidents.load_stats, loaded=len(kept), reports_joined=sum(len(r.reports) for r in kept))
    return IncidentSet(kept, stats, incidents.quarantined)
