"""Chatbots and self-harm: a sparse database abstains and a second one takes over.

    python3 demos/03_chatbot_case_study.py
"""

from pathlib import Path

from trendlens.assessor import stub_backend
from trendlens.classify import classbox
from trendlens.pipeline import load_run_config, open_databases, run_pipeline

BUNDLE = Path(__file__).resolve().parent.parent / "fixtures" / "chatbot"

config = load_run_config(BUNDLE / "config.yaml")
result = run_pipeline(config, config.mq.timeframe.explicit_periods, open_databases(config),
                      stub_backend(config.stub_rules))

for evidence in result.evidence:
    counts = [b.full_count for b in evidence.bounds]
    print(f"{evidence.source:>5}: full matches {counts[0]} -> {counts[1]}, {evidence.outcome.status.value}")
print(f"merged harm trend from {result.harm.source}: {result.harm.status.value}")
b1, b2 = next(e for e in result.evidence if e.source == result.harm.source).bounds
print(f"  persons affected: [{b1.lower}, {b1.upper}] -> [{b2.lower:,}, {b2.upper:,}]")
for est in result.exposure_estimates:
    print(f"exposure {est.period.start_date.year}: {est.point / 1e6:.0f}M people, order 10^{est.oom}")
print()
print(classbox(result.trajectory))
