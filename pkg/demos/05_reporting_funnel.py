"""Why stable under-reporting cancels out in a trend and drifting under-reporting does not.

    python3 demos/05_reporting_funnel.py
"""

from pathlib import Path

from trendlens.synth import generate, load_config, recovery_experiment

SYNTH = Path(__file__).resolve().parent.parent / "fixtures" / "synth"

for name in ("stable", "escalating", "nonstationary", "sparse"):
    config = load_config(SYNTH / f"{name}.json")
    stream = generate(config)
    report = recovery_experiment(config, n_runs=100)
    print(f"{name}: propensity {tuple(round(p, 3) for p in config.propensity())}, "
          f"one draw observed {stream.observed_counts} of {stream.realized_counts}")
    print(f"  truth {report.true_category.value}; recovered {report.recovery_rate:.0%}, "
          f"abstained {report.abstention_rate:.0%}, harm statuses {report.harm_status_counts}")
