"""Inter-assessor agreement: stratified samples, Cohen's kappa, bound MAE.

Sampling draws from numpy's PCG64 *raw* bit stream, which numpy keeps stable
across releases (unlike ``Generator`` methods), so a seed reproduces the same
sample on any version.
"""

from __future__ import annotations

import json
from collections import Counter
from dataclasses import dataclass, field
from typing import Dict, Hashable, Iterable, List, Mapping, Optional, Sequence, Tuple

import numpy as np

from trendlens.assessor import Assessment, Verdict
from trendlens.errors import EmptyInput, EmptyStratum, LengthMismatch, NoComparablePairs, UnknownLabel
from trendlens.harm import match_class
from trendlens.ingest import IncidentRecord, attach_context

STRATA = ("full", "partial", "negative")
VERDICTS = tuple(v.value for v in Verdict)
BLINDED_FIELDS = ("sample_id", "title", "description", "report_excerpt")
GENERATOR = "numpy.random.PCG64/raw"


class SeededStream:
    """Unbiased bounded integers from PCG64 raw output (rejection sampling)."""

    def __init__(self, seed: int):
        self._bits = np.random.PCG64(seed)

    def below(self, n: int) -> int:
        if n <= 0:
            raise ValueError("n must be positive")
        limit = (2**64 // n) * n
        while True:
            x = int(self._bits.random_raw())
            if x < limit:
                return x % n

    def shuffle(self, items: list) -> list:
        out = list(items)
        for i in range(len(out) - 1, 0, -1):
            j = self.below(i + 1)
            out[i], out[j] = out[j], out[i]
        return out


@dataclass(frozen=True)
class SampleItem:
    sample_id: str
    incident_id: str
    stratum: str


@dataclass(frozen=True)
class Sample:
    items: Tuple[SampleItem, ...]
    seed: int
    k: int
    blinded: Tuple[dict, ...] = field(default=(), compare=False)

    def mapping(self) -> dict:
        """Sealed unblinding map, kept apart from the blinded export."""
        return {
            "seed": self.seed,
            "k": self.k,
            "generator": GENERATOR,
            "items": {it.sample_id: {"incident_id": it.incident_id, "stratum": it.stratum} for it in self.items},
        }

    def blinded_jsonl(self) -> str:
        return "".join(json.dumps(row, sort_keys=True, ensure_ascii=False) + "\n" for row in self.blinded)


def stratified_sample(assessments: Iterable[Assessment], k: int, seed: int,
                      records: Optional[Mapping[str, IncidentRecord]] = None,
                      include_report: bool = False) -> Sample:
    """Draw up to ``k`` incidents per stratum, then shuffle into a blinded export.

    Input order does not matter: candidates are sorted by incident id before
    drawing.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    pool = sorted(assessments, key=lambda a: a.incident_id)
    if not pool:
        raise EmptyInput("no assessments to sample from")
    stream = SeededStream(seed)
    chosen: List[Tuple[str, str]] = []
    for stratum in STRATA:
        members = [a.incident_id for a in pool if match_class(a) == stratum]
        chosen.extend((iid, stratum) for iid in stream.shuffle(members)[:k])
    order = stream.shuffle(chosen)
    width = max(4, len(str(len(order))))
    items = tuple(SampleItem(f"S{n + 1:0{width}d}", iid, stratum) for n, (iid, stratum) in enumerate(order))
    blinded = []
    for item in items:
        row = {"sample_id": item.sample_id, "title": "", "description": "", "report_excerpt": None}
        if records is not None and item.incident_id in records:
            ctx = attach_context(records[item.incident_id], include_report)
            row.update(title=ctx.title, description=ctx.description, report_excerpt=ctx.report_excerpt)
        blinded.append(row)
    return Sample(items, seed, k, tuple(blinded))


def cohen_kappa(labels_a: Sequence[Hashable], labels_b: Sequence[Hashable],
                categories: Sequence[Hashable]) -> float:
    """Cohen's kappa for two raters.

    Computed from integer counts, so identical inputs give exactly 1.0. When
    chance agreement is 1 (both raters constant on the same label) the result
    is 1.0 by convention.
    """
    if len(labels_a) != len(labels_b):
        raise LengthMismatch(f"{len(labels_a)} vs {len(labels_b)} labels")
    n = len(labels_a)
    if n == 0:
        raise LengthMismatch("need at least one labelled item")
    known = set(categories)
    for label in (*labels_a, *labels_b):
        if label not in known:
            raise UnknownLabel(repr(label))
    agree = sum(a == b for a, b in zip(labels_a, labels_b))
    count_a, count_b = Counter(labels_a), Counter(labels_b)
    chance = sum(count_a[c] * count_b[c] for c in known)
    denom = n * n - chance
    if denom == 0:
        return 1.0 if agree == n else 0.0
    return (n * agree - chance) / denom


@dataclass(frozen=True)
class Labels:
    s_match: str
    r_match: str
    harm_lower: Optional[int] = None
    harm_upper: Optional[int] = None

    @property
    def full(self) -> bool:
        return self.s_match == "TRUE" and self.r_match == "TRUE"

    @classmethod
    def from_dict(cls, data: Mapping) -> "Labels":
        return cls(
            s_match=str(data["s_match"]).upper(),
            r_match=str(data["r_match"]).upper(),
            harm_lower=data.get("harm_lower"),
            harm_upper=data.get("harm_upper"),
        )

    @classmethod
    def from_assessment(cls, a: Assessment) -> "Labels":
        return cls(a.s_match.value.value, a.r_match.value.value, a.harm_lower, a.harm_upper)


@dataclass(frozen=True)
class LabelPair:
    incident_id: str
    rater_a: Labels
    rater_b: Labels
    stratum: Optional[str] = None


def pair_labels(a: Mapping[str, Labels], b: Mapping[str, Labels],
                strata: Optional[Mapping[str, str]] = None) -> List[LabelPair]:
    """Join two raters' labels on item id; the id sets must match exactly."""
    if set(a) != set(b):
        missing = sorted(set(a) ^ set(b))
        raise LengthMismatch(f"raters labelled different items: {missing[:5]}")
    strata = strata or {}
    return [LabelPair(key, a[key], b[key], strata.get(key)) for key in sorted(a)]


def percent_agreement(pairs: Iterable[LabelPair], stratum: Optional[str] = None) -> float:
    chosen = [p for p in pairs if stratum is None or p.stratum == stratum]
    if not chosen:
        raise EmptyStratum(f"no pairs in stratum {stratum!r}")
    same = sum((p.rater_a.s_match, p.rater_a.r_match) == (p.rater_b.s_match, p.rater_b.r_match) for p in chosen)
    return 100.0 * same / len(chosen)


def bound_mae(pairs: Iterable[LabelPair]) -> Tuple[float, float, int, int]:
    """(mae_lower, mae_upper, n_included, n_excluded) over pairs where both raters gave both bounds."""
    lowers, uppers, excluded = [], [], 0
    for p in pairs:
        a, b = p.rater_a, p.rater_b
        if None in (a.harm_lower, a.harm_upper, b.harm_lower, b.harm_upper):
            excluded += 1
            continue
        lowers.append(abs(a.harm_lower - b.harm_lower))
        uppers.append(abs(a.harm_upper - b.harm_upper))
    if not lowers:
        raise NoComparablePairs("no pair has bounds from both raters")
    return float(np.mean(lowers)), float(np.mean(uppers)), len(lowers), excluded


@dataclass(frozen=True)
class AgreementReport:
    kappa_s: float
    kappa_r: float
    kappa_full: float
    per_stratum_pct: Dict[str, float]
    mae_lower: Optional[float]
    mae_upper: Optional[float]
    n: int
    n_bounds: int = 0
    n_bounds_excluded: int = 0

    def to_dict(self) -> dict:
        return {
            "kappa_s": self.kappa_s,
            "kappa_r": self.kappa_r,
            "kappa_full": self.kappa_full,
            "per_stratum_pct": dict(sorted(self.per_stratum_pct.items())),
            "mae_lower": self.mae_lower,
            "mae_upper": self.mae_upper,
            "n": self.n,
            "n_bounds": self.n_bounds,
            "n_bounds_excluded": self.n_bounds_excluded,
        }


def agreement_report(pairs: Sequence[LabelPair]) -> AgreementReport:
    """Kappa on S (3-way), R (3-way) and full-vs-not-full, plus percent agreement and MAE."""
    if not pairs:
        raise EmptyInput("no label pairs")
    kappa_s = cohen_kappa([p.rater_a.s_match for p in pairs], [p.rater_b.s_match for p in pairs], VERDICTS)
    kappa_r = cohen_kappa([p.rater_a.r_match for p in pairs], [p.rater_b.r_match for p in pairs], VERDICTS)
    kappa_full = cohen_kappa([p.rater_a.full for p in pairs], [p.rater_b.full for p in pairs], (True, False))
    strata = sorted({p.stratum for p in pairs if p.stratum is not None})
    per_stratum = {s: percent_agreement(pairs, s) for s in strata} or {"all": percent_agreement(pairs)}
    try:
        mae_lower, mae_upper, n_bounds, n_excluded = bound_mae(pairs)
    except NoComparablePairs:
        mae_lower = mae_upper = None
        n_bounds, n_excluded = 0, len(pairs)
    return AgreementReport(kappa_s, kappa_r, kappa_full, per_stratum, mae_lower, mae_upper,
                           len(pairs), n_bounds, n_excluded)


def read_labels(path, key: str = "sample_id") -> Dict[str, Labels]:
    """Read rater JSON-lines keyed by ``key`` (``sample_id`` or ``incident_id``)."""
    out: Dict[str, Labels] = {}
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if not line.strip():
                continue
            row = json.loads(line)
            ident = row.get(key, row.get("incident_id" if key == "sample_id" else "sample_id"))
            if ident is None:
                raise LengthMismatch(f"row without {key} in {path}")
            out[str(ident)] = Labels.from_dict(row)
    return out
