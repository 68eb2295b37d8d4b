"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

Results are listed under "acceptance criteria" at the end of the pytest
output. Run alone with ``pytest tests/test_acceptance.py`` or
``python3 tests/test_acceptance.py``.
"""

import itertools
import json
import random
import sys
import time
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).resolve().parent))

from conftest import FIXTURES, Y2024, Y2025, make_assessment  # noqa: E402
from trendlens.agreement import cohen_kappa  # noqa: E402
from trendlens.classify import Category, Direction, classify, trajectory  # noqa: E402
from trendlens.cli import main  # noqa: E402
from trendlens.exposure import ExposureTrendOutcome, oom  # noqa: E402
from trendlens.harm import harm_bounds, harm_trend, match_class, partition  # noqa: E402
from trendlens.synth import load_config, recovery_experiment  # noqa: E402
from trendlens.trend import TrendStatus  # noqa: E402


def _run(bundle, out):
    code = main(["run", str(FIXTURES / bundle / "config.yaml"), "--normalize-timestamps", "--out", str(out)])
    return code, json.loads((Path(out) / "report.json").read_text()) if code == 0 else None


def test_criterion_1_av_case_study(tmp_path, acceptance_line):
    start = time.perf_counter()
    code, report = _run("av", tmp_path)
    elapsed = time.perf_counter() - start
    traj = report["trajectory"]
    growth = report["harm_outcome"]["growth_rate"]
    expo_growth = report["exposure_outcome"]["growth_rate"]
    ok = (code == 0 and traj["category"] == "MITIGATING" and traj["absolute_harm_warning"] is True
          and abs(growth * 100 - 85.4) <= 0.1 and abs(expo_growth - 1.0) < 0.01 and elapsed < 5.0)
    assert acceptance_line(1, ok, f"{traj['category']}, warning={traj['absolute_harm_warning']}, "
                              f"harm {growth:+.2%}, exposure {expo_growth:+.1%}, {elapsed:.2f}s")


def test_criterion_2_chatbot_case_study(tmp_path, acceptance_line):
    code, report = _run("chatbot", tmp_path)
    aiid = [b for b in report["harm_evidence"] if b["source"] == "aiid"]
    oecd = [b for b in report["harm_evidence"] if b["source"] == "oecd"]
    ooms = [e["oom"] for e in report["exposure_estimates"]]
    ok = (code == 0 and aiid[0]["full_count"] == 2 and aiid[0]["status"] == "ABSTAIN"
          and [b["full_count"] for b in oecd] == [8, 55]
          and report["harm_outcome"]["status"] == "INCREASING" and report["harm_outcome"]["source"] == "oecd"
          and ooms == [8, 8] and report["trajectory"]["category"] == "ESCALATING")
    assert acceptance_line(2, ok, f"aiid {aiid[0]['status']}, oecd {[b['full_count'] for b in oecd]}, "
                              f"exposure OOM {ooms}, {report['trajectory']['category']}")


def test_criterion_3_proxy_counts(tmp_path, acceptance_line):
    code, report = _run("finance", tmp_path)
    by_source = {b["source"]: b for b in report["harm_evidence"]}
    inc, brc = by_source["dbir-security-incidents"], by_source["dbir-data-breaches"]
    ok = (code == 0 and inc["status"] == brc["status"] == "INCREASING"
          and abs(inc["growth_rate"] * 100 - 9.8) <= 0.1 and abs(brc["growth_rate"] * 100 - 34.5) <= 0.1)
    assert acceptance_line(3, ok, f"incidents {inc['growth_rate']:+.2%}, breaches {brc['growth_rate']:+.2%}, "
                              f"both {inc['status']}")


# Written from the procedure description alone, sharing nothing with trendlens.harm.
def brute_force(period1, period2, unit, min_full=3):
    def cls(s, r):
        if s == "FALSE" or r == "FALSE":
            return "negative"
        if s == "TRUE" and r == "TRUE":
            return "full"
        return "partial"

    def totals(items):
        lo = hi = 0
        n_full = n_partial = 0
        for _, s, r, a, b in items:
            kind = cls(s, r)
            if a is None and b is None:
                a = b = 1 if unit == "incidents" else 0
            if kind == "full":
                n_full += 1
                lo += a
                hi += b
            elif kind == "partial":
                n_partial += 1
                hi += b
        return lo, hi, n_full, n_partial

    t1, t2 = totals(period1), totals(period2)
    if t1[2] < min_full or t2[2] < min_full:
        status = "ABSTAIN"
    else:
        d_lo, d_hi = t2[0] - t1[0], t2[1] - t1[1]
        if d_lo > 0 and d_hi > 0:
            status = "INCREASING"
        elif d_lo < 0 and d_hi < 0:
            status = "DECREASING"
        elif d_lo == 0 and d_hi == 0:
            status = "FLAT"
        else:
            status = "DIVERGENT"
    return t1, t2, status, [cls(s, r) for _, s, r, _, _ in period1]


def _random_period(rng, prefix):
    out = []
    for i in range(rng.randint(0, 20)):
        s, r = rng.choice(["TRUE", "FALSE", "INDETERMINATE"]), rng.choice(["TRUE", "FALSE", "INDETERMINATE"])
        if rng.random() < 0.15:
            lo = hi = None
        else:
            lo = rng.randint(0, 30)
            hi = lo + rng.randint(0, 30)
        out.append((f"{prefix}{i:02d}", s, r, lo, hi))
    return out


def test_criterion_4_algorithm_oracle(acceptance_line):
    rng = random.Random(20250101)
    mismatches = 0
    pairs_seen = set()
    for case in range(1000):
        unit = rng.choice(["incidents", "incidents", "affected persons"])
        p1, p2 = _random_period(rng, "a"), _random_period(rng, "b")
        if case < 9:  # guarantee all nine verdict pairs appear
            s, r = list(itertools.product(["TRUE", "FALSE", "INDETERMINATE"], repeat=2))[case]
            p1.append(("fixed", s, r, 1, 2))
        pairs_seen.update((s, r) for _, s, r, _, _ in p1 + p2)
        o1, o2, o_status, o_classes = brute_force(p1, p2, unit)
        a1 = [make_assessment(i, s, r, lo, hi) for i, s, r, lo, hi in p1]
        a2 = [make_assessment(i, s, r, lo, hi) for i, s, r, lo, hi in p2]
        b1 = harm_bounds(partition(a1), Y2024, unit)
        b2 = harm_bounds(partition(a2), Y2025, unit)
        got = harm_trend(b1, b2)
        same = ((b1.lower, b1.upper, b1.full_count, b1.partial_count) == o1
                and (b2.lower, b2.upper, b2.full_count, b2.partial_count) == o2
                and got.status.value == o_status
                and [match_class(a) for a in a1] == o_classes)
        mismatches += not same
    ok = mismatches == 0 and len(pairs_seen) == 9
    assert acceptance_line(4, ok, f"1000 randomized cases, {mismatches} mismatches, "
                                  f"{len(pairs_seen)}/9 verdict pairs")


def test_criterion_5_kappa(acceptance_line):
    labels = ["TRUE", "FALSE", "INDETERMINATE"] * 7
    exact = cohen_kappa(labels, labels, ["TRUE", "FALSE", "INDETERMINATE"])
    a = ["T"] * 25 + ["F"] * 25
    b = ["T"] * 20 + ["F"] * 5 + ["T"] * 10 + ["F"] * 15
    hand = cohen_kappa(a, b, ["T", "F"])
    rng = np.random.default_rng(5)
    cats = ["TRUE", "FALSE", "INDETERMINATE"]
    ra = rng.choice(cats, 100_000, p=[0.6, 0.3, 0.1]).tolist()
    rb = rng.choice(cats, 100_000, p=[0.6, 0.3, 0.1]).tolist()
    mc = cohen_kappa(ra, rb, cats)
    ok = exact == 1.0 and abs(hand - 0.4) <= 1e-12 and abs(mc) < 0.02
    assert acceptance_line(5, ok, f"identical={exact!r}, 20/5/10/15 -> {hand!r}, independent 1e5 -> {mc:+.4f}")


def test_criterion_6_grid(acceptance_line):
    U, D, F, X = Direction.UP, Direction.DOWN, Direction.FLAT, Direction.UNDETERMINED
    expected = {
        (U, U): Category.ESCALATING, (U, F): Category.ESCALATING,
        (U, D): Category.MITIGATING, (F, D): Category.MITIGATING,
        (F, U): Category.CONCENTRATING, (D, U): Category.CONCENTRATING,
        (D, D): Category.RECEDING, (D, F): Category.RECEDING, (F, F): Category.RECEDING,
    }
    strict = {(U, U): Category.ESCALATING, (U, D): Category.MITIGATING,
              (D, U): Category.CONCENTRATING, (D, D): Category.RECEDING}
    wrong = [(e, h) for e, h in itertools.product(Direction, Direction)
             if classify(e, h) is not expected.get((e, h), Category.UNCLASSIFIABLE)]
    strict_ok = all(classify(e, h) is c for (e, h), c in strict.items())
    undetermined = [classify(e, h) for e, h in itertools.product(Direction, Direction) if X in (e, h)]
    ok = not wrong and strict_ok and all(c is Category.UNCLASSIFIABLE for c in undetermined)
    assert acceptance_line(6, ok, f"16 cells checked, {len(wrong)} wrong, strict cells ok={strict_ok}, "
                              f"{len(undetermined)} undetermined cells unclassifiable")


def _random_assessments(rng, prefix):
    out = []
    for i in range(rng.randint(0, 20)):
        s = rng.choice(["TRUE", "TRUE", "INDETERMINATE", "FALSE"])
        r = rng.choice(["TRUE", "TRUE", "INDETERMINATE", "FALSE"])
        lo = rng.randint(0, 20)
        out.append((f"{prefix}{i}", s, r, lo, lo + rng.randint(0, 20)))
    return out


def _trend(p1, p2, c):
    a1 = [make_assessment(i, s, r, lo * c, hi * c) for i, s, r, lo, hi in p1]
    a2 = [make_assessment(i, s, r, lo * c, hi * c) for i, s, r, lo, hi in p2]
    return harm_trend(harm_bounds(partition(a1), Y2024), harm_bounds(partition(a2), Y2025))


@pytest.mark.slow
def test_criterion_7_reporting_bias_robustness(acceptance_line):
    rng = random.Random(7)
    expos = [ExposureTrendOutcome(TrendStatus.INCREASING, 0.3), ExposureTrendOutcome(TrendStatus.DECREASING, -0.2),
             ExposureTrendOutcome(TrendStatus.FLAT, 0.0), ExposureTrendOutcome(TrendStatus.INCREASING, 1.0)]
    changed = 0
    n = 600
    for _ in range(n):
        p1, p2 = _random_assessments(rng, "a"), _random_assessments(rng, "b")
        expo = rng.choice(expos)
        base = _trend(p1, p2, 1)
        base_cat = trajectory(base, expo).category
        for c in (2, 10, 100):
            scaled = _trend(p1, p2, c)
            if scaled.status is not base.status or trajectory(scaled, expo).category is not base_cat:
                changed += 1
    stable = recovery_experiment(load_config(FIXTURES / "synth" / "stable.json"), n_runs=200)
    drift = recovery_experiment(load_config(FIXTURES / "synth" / "nonstationary.json"), n_runs=200)
    misreport = drift.harm_status_counts.get("INCREASING", 0) / drift.n_runs
    ok = changed == 0 and stable.recovery_rate >= 0.95 and misreport >= 0.8
    assert acceptance_line(7, ok, f"{n} instances x 3 scales, {changed} changes; stable recovery "
                              f"{stable.recovery_rate:.3f}; drifting funnel misreports INCREASING {misreport:.0%}")


def test_criterion_8_determinism(tmp_path, acceptance_line):
    _run("av", tmp_path / "a")
    _run("av", tmp_path / "b")
    same_run = (tmp_path / "a" / "report.json").read_bytes() == (tmp_path / "b" / "report.json").read_bytes()
    for name in ("s1", "s2"):
        main(["agreement", "sample", "--run-dir", str(tmp_path / "a"), "--k", "3", "--seed", "7",
              "--out", str(tmp_path / name)])
    same_sample = all((tmp_path / "s1" / f).read_bytes() == (tmp_path / "s2" / f).read_bytes()
                      for f in ("blinded.jsonl", "mapping.json"))
    assert acceptance_line(8, same_run and same_sample,
                       f"run reports identical={same_run}, agreement samples identical={same_sample}")


def test_criterion_9_order_of_magnitude(acceptance_line):
    rng = np.random.default_rng(9)
    paper = oom(88e6) == 8 and oom(156e6) == 8
    powers = all(oom(float(f"1e{k}")) == k for k in range(-12, 13))
    values = np.sort(10 ** rng.uniform(-6, 12, 1000))
    mags = [oom(float(v)) for v in values]
    monotone = all(a <= b for a, b in zip(mags, mags[1:]))
    assert acceptance_line(9, paper and powers and monotone,
                       f"88e6->{oom(88e6)}, 156e6->{oom(156e6)}, exact powers ok={powers}, "
                       f"monotone over 1000 values={monotone}")


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-q", "-p", "no:cacheprovider"]))
