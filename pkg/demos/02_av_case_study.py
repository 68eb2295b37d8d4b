"""Autonomous vehicles: a tier-1 reporting system outvotes a divergent news database.

    python3 demos/02_av_case_study.py
"""

from pathlib import Path

from trendlens.assessor import stub_backend
from trendlens.classify import classbox
from trendlens.pipeline import load_run_config, open_databases, run_pipeline

BUNDLE = Path(__file__).resolve().parent.parent / "fixtures" / "av"

config = load_run_config(BUNDLE / "config.yaml")
periods = config.mq.timeframe.explicit_periods
result = run_pipeline(config, periods, open_databases(config), stub_backend(config.stub_rules))

print(config.mq.render(), "\n")
for evidence in result.evidence:
    b1, b2 = evidence.bounds
    print(f"{evidence.source:>6}: [{b1.lower}, {b1.upper}] -> [{b2.lower}, {b2.upper}]  "
          f"{evidence.outcome.status.value}")
print(f"\nharm trend taken from {result.harm.source}: {result.harm.growth_rate:+.1%}")
for est in result.exposure_estimates:
    print(f"exposure {est.period.label()}: {est.point / 1e6:.0f}M miles "
          f"({est.low / 1e6:.0f}-{est.high / 1e6:.0f}M), order 10^{est.oom}")
print(f"exposure growth: {result.exposure.growth_rate:+.1%}\n")
print(classbox(result.trajectory))
