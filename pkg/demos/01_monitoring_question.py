"""Write a monitoring question, render it, and derive its observation periods.

    python3 demos/01_monitoring_question.py
"""

import datetime as dt

import yaml

from trendlens import mq as mqmod

config = {
    "subject": "Registered AV-capable vehicles",
    "opportunity": "Operating in self-driving mode on public roads",
    "risk_event": "Cause injury or loss of life",
    "timeframe": {"text": "Per million vehicle-miles", "frequency": "yearly", "buffer_months": 3},
    "harm_unit": "incidents",
}
question = mqmod.parse_mq(yaml.safe_dump(config))
print(question.render())

# Periods are the two latest complete calendar years before the 3-month reporting buffer.
for run_date in ("2026-06-01", "2026-02-15"):
    earlier, later = mqmod.derive_periods(question.timeframe, dt.date.fromisoformat(run_date))
    print(f"run on {run_date}: compare {earlier.label()} with {later.label()}")

monthly = mqmod.PeriodSpec(frequency="monthly")
print("monthly on 2026-04-10:", [p.label() for p in mqmod.derive_periods(monthly, dt.date(2026, 4, 10))])

# The canonical JSON form round-trips.
assert mqmod.parse_mq(mqmod.serialize(question)) == question
