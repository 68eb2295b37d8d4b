"""Run reports: JSON document, Markdown rendering, schema check and atomic writes."""

from __future__ import annotations

import datetime as dt
import json
import os
import tempfile
from pathlib import Path
from typing import Any, Dict, List, Optional

import jsonschema

from trendlens import __version__
from trendlens.classify import classbox
from trendlens.errors import ReportSchemaError
from trendlens.harm import OVERSPECIFIED, WIDE_RANGE
from trendlens.pipeline import RunResult, Settings
from trendlens.trend import TrendStatus

NORMALIZED_TIMESTAMP = "1970-01-01T00:00:00Z"

CAVEAT_MONOTONIC = (
    "Trend claims compare two periods and assume roughly monotonic change across the timeframe."
)
CAVEAT_PROPENSITY = (
    "News-derived incident databases record what is reported, not what happens; the trend is robust "
    "only if reporting propensity is stable across the compared periods."
)
CAVEAT_OPPORTUNITY = (
    "The assessor judges subject and risk-event match only; the opportunity clause is folded into "
    "the subject context."
)
CAVEAT_DATE_FIELD = "Period membership uses each incident's own date field, not the first report date."

_PERIOD = {
    "type": "object",
    "required": ["start", "end"],
    "properties": {"start": {"type": "string"}, "end": {"type": "string"}},
}

REPORT_SCHEMA: Dict[str, Any] = {
    "type": "object",
    "required": ["mq", "sentence", "periods", "harm_evidence", "harm_outcome", "exposure_estimates",
                 "exposure_outcome", "trajectory", "caveats", "run_metadata"],
    "properties": {
        "mq": {"type": "object", "required": ["id", "subject", "opportunity", "risk_event", "timeframe",
                                              "harm_unit"]},
        "sentence": {"type": "string", "minLength": 1},
        "periods": {"type": "array", "items": _PERIOD, "minItems": 2, "maxItems": 2},
        "harm_evidence": {
            "type": "array",
            "items": {
                "type": "object",
                "required": ["source", "period", "lower", "upper", "full_count", "partial_count", "status",
                             "flags"],
                "properties": {
                    "lower": {"type": "integer", "minimum": 0},
                    "upper": {"type": "integer", "minimum": 0},
                    "status": {"enum": [s.value for s in TrendStatus]},
                },
            },
        },
        "harm_outcome": {"type": "object", "required": ["status", "growth_rate", "flags", "source"]},
        "exposure_estimates": {"type": ["array", "null"]},
        "exposure_outcome": {"type": "object", "required": ["status", "growth_rate"]},
        "trajectory": {
            "type": "object",
            "required": ["category", "e_direction", "hhat_direction", "absolute_harm_warning", "evidence"],
            "properties": {
                "category": {"enum": ["ESCALATING", "MITIGATING", "CONCENTRATING", "RECEDING",
                                      "UNCLASSIFIABLE"]},
                "absolute_harm_warning": {"type": "boolean"},
            },
        },
        "caveats": {"type": "array", "items": {"type": "string"}, "contains": {"const": CAVEAT_MONOTONIC}},
        "run_metadata": {
            "type": "object",
            "required": ["timestamp", "backend_id", "config_digest", "tool_version"],
        },
    },
}


def caveats_for(result: RunResult) -> List[str]:
    caveats = [CAVEAT_MONOTONIC]
    if any(e.news_derived for e in result.evidence):
        caveats.append(CAVEAT_PROPENSITY)
    caveats.append(CAVEAT_OPPORTUNITY)
    caveats.append(CAVEAT_DATE_FIELD)
    harm_tiers = sorted({b.tier for e in result.evidence if e.source == result.harm.source for b in e.bounds})
    if harm_tiers:
        caveats.append(f"Harm evidence from {result.harm.source} is tier {harm_tiers[0]}.")
    else:
        caveats.append("No harm source produced a trend (tier 4: principled abstention).")
    if result.exposure_estimates:
        tiers = sorted({e.tier for e in result.exposure_estimates})
        caveats.append(f"Exposure estimates are tier {', '.join(map(str, tiers))}.")
    flags = set(result.harm.flags).union(*(b.flags for e in result.evidence for b in e.bounds))
    if OVERSPECIFIED in flags:
        caveats.append("Partial matches greatly outnumber full matches; the question may be overspecified.")
    if WIDE_RANGE in flags:
        caveats.append("A harm range spans more than two orders of magnitude; check the harm unit.")
    if result.trajectory.qualifier == "stable":
        caveats.append("Neither exposure nor harm per exposure moved beyond the dead band (stable).")
    return caveats


def build_report(result: RunResult, *, backend_id: str, config_digest: str, settings: Settings,
                 timestamp: Optional[str] = None, normalize: bool = False, seed: Optional[int] = None) -> dict:
    if normalize:
        timestamp = NORMALIZED_TIMESTAMP
    elif timestamp is None:
        timestamp = dt.datetime.now(dt.timezone.utc).strftime("%Y-%m-%dT%H:%M:%SZ")
    report = {
        "mq": result.mq.to_dict(),
        "sentence": result.mq.render(),
        "periods": [p.to_dict() for p in result.periods],
        "harm_evidence": [block for e in result.evidence for block in e.blocks()],
        "harm_outcome": result.harm.to_dict(),
        "exposure_estimates": [e.to_dict() for e in result.exposure_estimates] if result.exposure_estimates
        else None,
        "exposure_outcome": result.exposure.to_dict(),
        "trajectory": result.trajectory.to_dict(),
        "caveats": caveats_for(result),
        "notes": list(result.notes),
        "run_metadata": {
            "timestamp": timestamp,
            "backend_id": backend_id,
            "config_digest": config_digest,
            "tool_version": __version__,
            "settings": settings.to_dict(),
            "seed": seed,
        },
    }
    check_report(report)
    return report


def check_report(report: dict) -> None:
    try:
        jsonschema.validate(report, REPORT_SCHEMA)
    except jsonschema.ValidationError as exc:
        raise ReportSchemaError(exc.message) from None


def dumps(report: dict) -> str:
    return json.dumps(report, indent=2, sort_keys=True, ensure_ascii=False) + "\n"


def atomic_write(path, text: str) -> None:
    """Write to a sibling temp file then rename over the target."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _pct(x) -> str:
    if x is None:
        return "n/a"
    if isinstance(x, str):
        return x
    return f"{x * 100:+.1f}%"


def to_markdown(report: dict) -> str:
    mq = report["mq"]
    lines = [
        f"# {mq['id']}",
        "",
        f"**Monitoring question:** {report['sentence']}",
        "",
        "## Harm estimation, H",
        "",
        "| source | period | lower | upper | full | partial | status | flags |",
        "|---|---|---|---|---|---|---|---|",
    ]
    for b in report["harm_evidence"]:
        period = f"{b['period']['start']}..{b['period']['end']}"
        lines.append(f"| {b['source']} | {period} | {b['lower']} | {b['upper']} | {b['full_count']} | "
                     f"{b['partial_count']} | {b['status']} | {', '.join(b['flags'])} |")
    harm = report["harm_outcome"]
    lines += [
        "",
        f"**Trend:** {harm['status'].capitalize()} ({_pct(harm['growth_rate'])}), "
        f"source: {harm['source'] or 'none'}.",
        "",
        "## Exposure estimation, E",
        "",
    ]
    if report["exposure_estimates"]:
        for e in report["exposure_estimates"]:
            lines.append(f"- {e['period']['start']}..{e['period']['end']}: {e['point']:,.0f} "
                         f"({e['low']:,.0f} to {e['high']:,.0f}, plausible range); "
                         f"order of magnitude 10^{e['oom']}; tier {e['tier']}, confidence {e['confidence']}.")
    else:
        lines.append("- No exposure estimate (abstained).")
    expo = report["exposure_outcome"]
    lines += [
        "",
        f"**Trend:** {expo['status'].capitalize()} ({_pct(expo['growth_rate'])}).",
        "",
    ]
    from trendlens.classify import TrajectoryResult

    lines.append(classbox(TrajectoryResult.from_dict(report["trajectory"])))
    lines += ["", "## Caveats", ""]
    lines += [f"- {c}" for c in report["caveats"]]
    meta = report["run_metadata"]
    lines += ["", f"_backend {meta['backend_id']}, tool {meta['tool_version']}, {meta['timestamp']}_", ""]
    return "\n".join(lines)
