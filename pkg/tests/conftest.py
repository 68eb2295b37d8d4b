import datetime as dt
from pathlib import Path

import pytest

from trendlens.assessor import Assessment, MatchVerdict, Verdict
from trendlens.mq import Period

ROOT = Path(__file__).resolve().parent.parent
FIXTURES = ROOT / "fixtures"

Y2024 = Period(dt.date(2024, 1, 1), dt.date(2024, 12, 31))
Y2025 = Period(dt.date(2025, 1, 1), dt.date(2025, 12, 31))


def make_assessment(incident_id, s="TRUE", r="TRUE", lower=None, upper=None, backend_id="test@assess-v1"):
    return Assessment(
        incident_id=incident_id,
        s_match=MatchVerdict(Verdict(s)),
        r_match=MatchVerdict(Verdict(r)),
        harm_lower=lower,
        harm_upper=upper,
        backend_id=backend_id,
    )


@pytest.fixture
def fixtures_dir():
    return FIXTURES


_ACCEPTANCE = pytest.StashKey[list]()


@pytest.fixture
def acceptance_line(request):
    """Record one PASS/FAIL line for the end-of-run acceptance summary."""
    lines = request.config.stash.setdefault(_ACCEPTANCE, [])

    def record(number, ok, detail):
        lines.append((number, f"[{'PASS' if ok else 'FAIL'}] criterion {number}: {detail}"))
        return ok
    return record


def pytest_terminal_summary(terminalreporter, config):
    lines = config.stash.get(_ACCEPTANCE, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for _, line in sorted(lines):
            terminalreporter.write_line(line)
