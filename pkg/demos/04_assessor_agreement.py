"""Check two assessors against each other on a blinded stratified sample.

    python3 demos/04_assessor_agreement.py
"""

import random

from trendlens.agreement import Labels, agreement_report, pair_labels, stratified_sample
from trendlens.assessor import Assessment, MatchVerdict, Verdict

rng = random.Random(0)
verdicts = list(Verdict)


def fake_assessment(i):
    return Assessment(f"inc-{i:03d}", MatchVerdict(rng.choice(verdicts)), MatchVerdict(rng.choice(verdicts)),
                      1, rng.randint(1, 4), backend_id="demo@assess-v1")


assessments = [fake_assessment(i) for i in range(60)]
sample = stratified_sample(assessments, k=5, seed=7)
print(f"sampled {len(sample.items)} items; blinded export has only {sorted(sample.blinded[0])}")

# Rater A copies the pipeline; rater B disagrees on the risk event a third of the time.
by_id = {a.incident_id: a for a in assessments}
rater_a, rater_b = {}, {}
for item in sample.items:
    a = by_id[item.incident_id]
    rater_a[item.sample_id] = Labels.from_assessment(a)
    r = a.r_match.value.value if rng.random() > 1 / 3 else rng.choice(verdicts).value
    rater_b[item.sample_id] = Labels(a.s_match.value.value, r, a.harm_lower, a.harm_upper + rng.randint(0, 2))

strata = {it.sample_id: it.stratum for it in sample.items}
report = agreement_report(pair_labels(rater_a, rater_b, strata))
for key, value in report.to_dict().items():
    print(f"{key:>18}: {value}")
