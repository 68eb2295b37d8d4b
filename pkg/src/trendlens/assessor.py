"""Per-incident assessment against a monitoring question.

Backends are objects with a ``backend_id`` string and a
``complete(payload) -> str`` method returning the raw response text. Two are
provided: :class:`RemoteBackend` (chat-completions over HTTPS) and
:class:`StubBackend` (deterministic keyword rules, used for tests and fixtures).
"""

from __future__ import annotations

import enum
import hashlib
import json
import logging
import os
import re
import threading
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from functools import lru_cache
from importlib import resources
from typing import Any, Callable, Iterable, List, Optional, Sequence, Tuple

import httpx

from trendlens.errors import ConfigError, NotJson, RateLimited, TransportError
from trendlens.ingest import AssessmentContext, IncidentRecord, attach_context
from trendlens.mq import MonitoringQuestion

logger = logging.getLogger(__name__)

PROMPT_VERSION = "assess-v1"
RESPONSE_KEYS = (
    "s_match",
    "s_reasoning",
    "r_match",
    "r_reasoning",
    "harm_lower",
    "harm_upper",
    "harm_reasoning",
    "suggested_proxy",
)
DEFAULT_MODEL = "anthropic/claude-3.5-haiku"
DEFAULT_BASE_URL = "https://openrouter.ai/api/v1"
DEFAULT_TEMPERATURE = 0.1
DEFAULT_MAX_TOKENS = 1000
API_KEY_ENV = "TRENDLENS_API_KEY"

SYSTEM_PROMPT = "You label AI incident records for a harm monitoring study. Reply with JSON only."


class Verdict(str, enum.Enum):
    TRUE = "TRUE"
    FALSE = "FALSE"
    INDETERMINATE = "INDETERMINATE"


@dataclass(frozen=True)
class MatchVerdict:
    value: Verdict
    reasoning: str = ""


@dataclass(frozen=True)
class Assessment:
    incident_id: str
    s_match: MatchVerdict
    r_match: MatchVerdict
    harm_lower: Optional[int] = None
    harm_upper: Optional[int] = None
    harm_reasoning: str = ""
    suggested_proxy: str = ""
    backend_id: str = "unknown"

    def __post_init__(self):
        if not self.backend_id:
            raise ValueError("backend_id must be non-empty")
        for value in (self.harm_lower, self.harm_upper):
            if value is not None and value < 0:
                raise ValueError("harm bounds must be non-negative")
        if self.harm_lower is not None and self.harm_upper is not None and self.harm_lower > self.harm_upper:
            raise ValueError("harm_lower must not exceed harm_upper")

    def to_dict(self) -> dict:
        return {
            "incident_id": self.incident_id,
            "s_match": self.s_match.value.value,
            "s_reasoning": self.s_match.reasoning,
            "r_match": self.r_match.value.value,
            "r_reasoning": self.r_match.reasoning,
            "harm_lower": self.harm_lower,
            "harm_upper": self.harm_upper,
            "harm_reasoning": self.harm_reasoning,
            "suggested_proxy": self.suggested_proxy,
            "backend_id": self.backend_id,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "Assessment":
        return cls(
            incident_id=str(data["incident_id"]),
            s_match=MatchVerdict(Verdict(data["s_match"]), data.get("s_reasoning", "")),
            r_match=MatchVerdict(Verdict(data["r_match"]), data.get("r_reasoning", "")),
            harm_lower=data.get("harm_lower"),
            harm_upper=data.get("harm_upper"),
            harm_reasoning=data.get("harm_reasoning", ""),
            suggested_proxy=data.get("suggested_proxy", ""),
            backend_id=data.get("backend_id") or "unknown",
        )


def exhausted_assessment(incident_id: str, backend_id: str, reason: str) -> Assessment:
    return Assessment(
        incident_id=incident_id,
        s_match=MatchVerdict(Verdict.INDETERMINATE, reason),
        r_match=MatchVerdict(Verdict.INDETERMINATE, reason),
        harm_reasoning=reason,
        backend_id=backend_id,
    )


@dataclass(frozen=True)
class RetryPolicy:
    max_attempts: int = 3
    base_delay: float = 1.0
    rate_limit_multiplier: float = 4.0

    def __post_init__(self):
        if self.max_attempts < 1:
            raise ValueError("max_attempts must be >= 1")
        if self.rate_limit_multiplier <= 1:
            raise ValueError("rate_limit_multiplier must be > 1")
        if self.base_delay < 0:
            raise ValueError("base_delay must be >= 0")

    def delay(self, failed_attempt: int, rate_limited: bool) -> float:
        """Wait before the attempt following ``failed_attempt`` (1-based)."""
        wait = self.base_delay * 2 ** (failed_attempt - 1)
        return wait * self.rate_limit_multiplier if rate_limited else wait


@dataclass(frozen=True)
class PromptPayload:
    system: str
    user: str
    prompt_version: str
    context: AssessmentContext = field(compare=False)

    def messages(self) -> List[dict]:
        return [{"role": "system", "content": self.system}, {"role": "user", "content": self.user}]


@lru_cache(maxsize=None)
def load_prompt_template(version: str = PROMPT_VERSION) -> str:
    name = version.replace("assess-", "assess_") + ".txt"
    return resources.files("trendlens.prompts").joinpath(name).read_text(encoding="utf-8")


def render_context(ctx: AssessmentContext) -> str:
    lines = [
        f"Title: {ctx.title}",
        f"Description: {ctx.description}",
        f"Alleged deployers: {', '.join(ctx.deployers) or 'unknown'}",
        f"Alleged developers: {', '.join(ctx.developers) or 'unknown'}",
        f"Alleged harmed parties: {', '.join(ctx.harmed_parties) or 'unknown'}",
    ]
    if ctx.report_excerpt:
        lines.append("Report excerpt:")
        lines.append(ctx.report_excerpt)
    return "\n".join(lines)


def build_prompt(mq: MonitoringQuestion, ctx: AssessmentContext, version: str = PROMPT_VERSION) -> PromptPayload:
    template = load_prompt_template(version)
    user = template.format(
        subject=mq.subject,
        opportunity=mq.opportunity,
        risk_event=mq.risk_event,
        harm_unit=mq.harm_unit,
        keys=", ".join(RESPONSE_KEYS),
        incident=render_context(ctx),
    )
    return PromptPayload(system=SYSTEM_PROMPT, user=user, prompt_version=version, context=ctx)


_VERDICT_WORDS = {
    "true": Verdict.TRUE,
    "false": Verdict.FALSE,
    "indeterminate": Verdict.INDETERMINATE,
}


def _verdict(raw: Any, reasoning: Any) -> MatchVerdict:
    if isinstance(raw, bool):
        value = Verdict.TRUE if raw else Verdict.FALSE
    elif isinstance(raw, str) and raw.strip().lower() in _VERDICT_WORDS:
        value = _VERDICT_WORDS[raw.strip().lower()]
    else:
        return MatchVerdict(Verdict.INDETERMINATE, "unparseable")
    return MatchVerdict(value, str(reasoning) if reasoning is not None else "")


def _bound(raw: Any) -> Optional[int]:
    if raw is None or isinstance(raw, bool):
        return None
    try:
        number = float(str(raw).replace(",", "").strip())
    except ValueError:
        return None
    if number != number or number < 0 or number in (float("inf"),):
        return None
    return int(round(number))


def parse_assessment(response_text: str, incident_id: str, backend_id: str) -> Assessment:
    """Map a flat JSON response onto an :class:`Assessment`.

    Raises :class:`NotJson` when the text is not a JSON object, which callers
    treat as a retryable backend fault. Semantically odd content is tolerated:
    unknown verdicts become INDETERMINATE and swapped bounds are reordered.
    """
    try:
        data = json.loads(response_text)
    except (TypeError, json.JSONDecodeError) as exc:
        raise NotJson(str(exc)) from None
    if not isinstance(data, dict):
        raise NotJson(f"expected a JSON object, got {type(data).__name__}")
    lower, upper = _bound(data.get("harm_lower")), _bound(data.get("harm_upper"))
    harm_reasoning = str(data.get("harm_reasoning") or "")
    if lower is not None and upper is not None and lower > upper:
        lower, upper = upper, lower
        harm_reasoning = (harm_reasoning + " [bounds swapped: lower exceeded upper]").strip()
    return Assessment(
        incident_id=incident_id,
        s_match=_verdict(data.get("s_match"), data.get("s_reasoning")),
        r_match=_verdict(data.get("r_match"), data.get("r_reasoning")),
        harm_lower=lower,
        harm_upper=upper,
        harm_reasoning=harm_reasoning,
        suggested_proxy=str(data.get("suggested_proxy") or ""),
        backend_id=backend_id,
    )


class RunLog:
    """Thread-safe collector of per-call log entries."""

    def __init__(self):
        self._entries: List[dict] = []
        self._lock = threading.Lock()

    def append(self, entry: dict) -> None:
        with self._lock:
            self._entries.append(entry)

    @property
    def entries(self) -> List[dict]:
        with self._lock:
            return sorted(self._entries, key=lambda e: (e["mq_id"], e["incident_id"]))

    def write(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            for entry in self.entries:
                fh.write(json.dumps(entry, sort_keys=True) + "\n")


def assess_incident(
    backend,
    mq: MonitoringQuestion,
    record: IncidentRecord,
    policy: RetryPolicy = RetryPolicy(),
    *,
    include_report: bool = False,
    max_chars: int = 4000,
    run_log: Optional[RunLog] = None,
    sleep: Callable[[float], None] = time.sleep,
) -> Assessment:
    """Assess one incident, retrying transport faults and non-JSON replies.

    Exhausted retries never raise: both verdicts come back INDETERMINATE with
    no bounds.
    """
    payload = build_prompt(mq, attach_context(record, include_report, max_chars))
    backend_id = backend.backend_id
    last_error = ""
    for attempt in range(1, policy.max_attempts + 1):
        try:
            text = backend.complete(payload)
            result = parse_assessment(text, record.incident_id, backend_id)
        except (TransportError, NotJson) as exc:
            last_error = f"{type(exc).__name__}: {exc}"
            logger.warning("attempt %d/%d failed for %s: %s", attempt, policy.max_attempts,
                           record.incident_id, last_error)
            if attempt < policy.max_attempts:
                sleep(policy.delay(attempt, isinstance(exc, RateLimited)))
            continue
        _log(run_log, backend, mq, record, attempt, "ok")
        return result
    _log(run_log, backend, mq, record, policy.max_attempts, "exhausted")
    return exhausted_assessment(record.incident_id, backend_id, f"retries exhausted ({last_error})")


def _log(run_log, backend, mq, record, attempts, outcome):
    if run_log is None:
        return
    run_log.append({
        "incident_id": record.incident_id,
        "mq_id": mq.id,
        "backend_id": backend.backend_id,
        "attempts": attempts,
        "outcome": outcome,
        "temperature": getattr(backend, "temperature", DEFAULT_TEMPERATURE),
        "max_tokens": getattr(backend, "max_tokens", DEFAULT_MAX_TOKENS),
    })


def assess_batch(
    backend,
    mqs: Sequence[MonitoringQuestion],
    records: Sequence[IncidentRecord],
    policy: RetryPolicy = RetryPolicy(),
    concurrency_limit: int = 4,
    **kwargs,
) -> List[Tuple[str, Assessment]]:
    """Assess every (MQ, incident) pair with at most ``concurrency_limit`` calls in flight.

    Output is sorted by (mq_id, incident_id) so it does not depend on
    completion order.
    """
    if concurrency_limit < 1:
        raise ValueError("concurrency_limit must be >= 1")
    jobs = [(mq, record) for mq in mqs for record in records]
    if not jobs:
        return []
    with ThreadPoolExecutor(max_workers=concurrency_limit) as pool:
        futures = [
            (mq.id, pool.submit(assess_incident, backend, mq, record, policy, **kwargs))
            for mq, record in jobs
        ]
        results = [(mq_id, fut.result()) for mq_id, fut in futures]
    return sorted(results, key=lambda pair: (pair[0], pair[1].incident_id))


# --------------------------------------------------------------------------
# Backends
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class KeywordRule:
    keywords: Tuple[str, ...]
    s_match: Verdict = Verdict.TRUE
    r_match: Verdict = Verdict.TRUE
    harm_lower: Optional[int] = None
    harm_upper: Optional[int] = None
    require_all: bool = False

    def matches(self, text: str) -> bool:
        hits = (kw.lower() in text for kw in self.keywords)
        return all(hits) if self.require_all else any(hits)

    @classmethod
    def from_dict(cls, data: dict) -> "KeywordRule":
        keywords = data.get("keywords") or data.get("keyword")
        if isinstance(keywords, str):
            keywords = [keywords]
        if not keywords:
            raise ConfigError("stub rule needs at least one keyword")
        return cls(
            keywords=tuple(str(k) for k in keywords),
            s_match=_verdict(_word(data.get("s_match", "true")), None).value,
            r_match=_verdict(_word(data.get("r_match", "true")), None).value,
            harm_lower=data.get("lower", data.get("harm_lower")),
            harm_upper=data.get("upper", data.get("harm_upper")),
            require_all=bool(data.get("require_all", False)),
        )


def _word(value: Any) -> Any:
    return value if not isinstance(value, Verdict) else value.value


# Ground-truth marker embedded by the synthetic simulator, e.g.
# [[truth s=TRUE r=TRUE lower=1 upper=1]]
_MARKER = re.compile(
    r"\[\[truth s=(?P<s>\w+) r=(?P<r>\w+)(?: lower=(?P<lower>\d+))?(?: upper=(?P<upper>\d+))?\]\]"
)


class StubBackend:
    """Deterministic backend driven by keyword rules and ground-truth markers.

    Rules are tried in order against the lowercased title and description;
    the first hit wins. With ``read_markers`` set, a ``[[truth ...]]`` marker in
    the description takes precedence. Records matching nothing come back
    FALSE/FALSE. ``noise`` (probability) flips verdicts to INDETERMINATE,
    seeded per incident id so reruns agree.
    """

    temperature = DEFAULT_TEMPERATURE
    max_tokens = DEFAULT_MAX_TOKENS

    def __init__(self, rules: Iterable[KeywordRule] = (), *, read_markers: bool = True,
                 noise: float = 0.0, noise_seed: int = 0, name: str = "stub"):
        self.rules = tuple(rules)
        self.read_markers = read_markers
        self.noise = noise
        self.noise_seed = noise_seed
        self.backend_id = f"{name}@{PROMPT_VERSION}"

    def verdict_for(self, ctx: AssessmentContext) -> dict:
        text = f"{ctx.title}\n{ctx.description}".lower()
        marker = _MARKER.search(ctx.description) if self.read_markers else None
        if marker:
            out = {
                "s_match": marker["s"].lower(),
                "r_match": marker["r"].lower(),
                "harm_lower": int(marker["lower"]) if marker["lower"] else None,
                "harm_upper": int(marker["upper"]) if marker["upper"] else None,
                "reason": "ground-truth marker",
            }
        else:
            out = {"s_match": "false", "r_match": "false", "harm_lower": None, "harm_upper": None,
                   "reason": "no rule matched"}
            for index, rule in enumerate(self.rules):
                if rule.matches(text):
                    out = {
                        "s_match": rule.s_match.value.lower(),
                        "r_match": rule.r_match.value.lower(),
                        "harm_lower": rule.harm_lower,
                        "harm_upper": rule.harm_upper,
                        "reason": f"rule {index} ({', '.join(rule.keywords)})",
                    }
                    break
        if self.noise > 0 and _unit_hash(self.noise_seed, ctx.incident_id) < self.noise:
            out["s_match"] = "indeterminate"
            out["reason"] += "; noise injected"
        return out

    def complete(self, payload: PromptPayload) -> str:
        v = self.verdict_for(payload.context)
        return json.dumps({
            "s_match": v["s_match"],
            "s_reasoning": v["reason"],
            "r_match": v["r_match"],
            "r_reasoning": v["reason"],
            "harm_lower": v["harm_lower"],
            "harm_upper": v["harm_upper"],
            "harm_reasoning": v["reason"],
            "suggested_proxy": "",
        }, sort_keys=True)


def _unit_hash(seed: int, key: str) -> float:
    digest = hashlib.sha256(f"{seed}:{key}".encode()).digest()
    return int.from_bytes(digest[:8], "big") / 2**64


def stub_backend(rules: Iterable[Any] = (), **kwargs) -> StubBackend:
    """Build a :class:`StubBackend` from rule objects or plain dicts."""
    parsed = [r if isinstance(r, KeywordRule) else KeywordRule.from_dict(r) for r in rules]
    return StubBackend(parsed, **kwargs)


# Provider error codes that signal throttling even when the HTTP status does not.
RATE_LIMIT_CODES = frozenset({"429", "rate_limit_exceeded", "rate_limited", "too_many_requests", "throttled"})


class RemoteBackend:
    """Chat-completions client (OpenRouter-compatible wire format)."""

    def __init__(self, model: str = DEFAULT_MODEL, *, base_url: str = DEFAULT_BASE_URL,
                 api_key: Optional[str] = None, temperature: float = DEFAULT_TEMPERATURE,
                 max_tokens: int = DEFAULT_MAX_TOKENS, timeout: float = 60.0,
                 transport: Optional[httpx.BaseTransport] = None):
        api_key = api_key or os.environ.get(API_KEY_ENV)
        if not api_key:
            raise ConfigError(f"set {API_KEY_ENV} to use the remote backend")
        self.model = model
        self.temperature = temperature
        self.max_tokens = max_tokens
        self.backend_id = f"{model}@{PROMPT_VERSION}"
        self._client = httpx.Client(
            base_url=base_url.rstrip("/"),
            headers={"Authorization": f"Bearer {api_key}"},
            timeout=timeout,
            transport=transport,
        )

    def request_body(self, payload: PromptPayload) -> dict:
        return {
            "model": self.model,
            "temperature": self.temperature,
            "max_tokens": self.max_tokens,
            "response_format": {"type": "json_object"},
            "messages": payload.messages(),
        }

    def complete(self, payload: PromptPayload) -> str:
        try:
            response = self._client.post("/chat/completions", json=self.request_body(payload))
        except httpx.HTTPError as exc:
            raise TransportError(str(exc)) from exc
        if response.status_code == 429:
            raise RateLimited("HTTP 429")
        try:
            body = response.json()
        except ValueError:
            body = None
        code = _error_code(body)
        if code is not None and code.lower() in RATE_LIMIT_CODES:
            raise RateLimited(f"provider error {code}")
        if response.status_code >= 400 or code is not None:
            raise TransportError(f"HTTP {response.status_code}: {code or response.text[:200]}")
        try:
            return body["choices"][0]["message"]["content"]
        except (KeyError, IndexError, TypeError):
            raise NotJson("response has no choices[0].message.content") from None

    def close(self) -> None:
        self._client.close()


def _error_code(body: Any) -> Optional[str]:
    if not isinstance(body, dict) or "error" not in body:
        return None
    error = body["error"]
    if isinstance(error, dict):
        code = error.get("code") or error.get("type") or "error"
        return str(code)
    return str(error)
