"""Regenerate the fixture bundles in this directory.

    python fixtures/build_fixtures.py

Every bundle is deterministic; rerunning produces identical files.
"""

import csv
import datetime as dt
import json
from pathlib import Path

import yaml

HERE = Path(__file__).resolve().parent

Y2023 = {"start": "2023-01-01", "end": "2023-12-31"}
Y2024 = {"start": "2024-01-01", "end": "2024-12-31"}
Y2025 = {"start": "2025-01-01", "end": "2025-12-31"}


def spread_dates(year, n):
    """n dates spread evenly across a calendar year."""
    start = dt.date(year, 1, 1)
    days = (dt.date(year, 12, 31) - start).days + 1
    return [start + dt.timedelta(days=(i * days) // n) for i in range(n)]


def write_aiid(root, incidents, reports):
    root.mkdir(parents=True, exist_ok=True)
    cols = ["incident_id", "date", "title", "description", "Alleged deployer of AI system",
            "Alleged developer of AI system", "Alleged harmed or nearly harmed parties"]
    with open(root / "incidents.csv", "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(cols)
        w.writerows(incidents)
    with open(root / "reports.csv", "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["report_id", "incident_id", "text", "url"])
        w.writerows(reports)


def write_config(path, data):
    with open(path, "w", encoding="utf-8") as fh:
        yaml.safe_dump(data, fh, sort_keys=False, allow_unicode=True, width=100)


def build_av():
    root = HERE / "av"
    root.mkdir(exist_ok=True)
    with open(root / "nhtsa.jsonl", "w", encoding="utf-8") as fh:
        n = 0
        for year, count in ((2024, 526), (2025, 975)):
            for day in spread_dates(year, count):
                n += 1
                fh.write(json.dumps({
                    "incident_id": f"nhtsa-{n:05d}",
                    "date": day.isoformat(),
                    "title": f"ADS crash report {n}",
                    "description": "Automated Driving System crash filed under the standing general order.",
                    "deployers": [], "developers": [], "harmed_parties": [], "reports": [],
                }, sort_keys=True) + "\n")

    incidents = [
        ("101", "2024-02-10", "Robotaxi rear-ended at intersection",
         "A driverless robotaxi was rear-ended while stopped.", '["Cruise"]', '["Cruise"]', '["passengers"]'),
        ("102", "2024-04-22", "Driverless shuttle minor collision",
         "An autonomous shuttle clipped a parked car.", '["Beep"]', '["Beep"]', '["pedestrians"]'),
        ("103", "2024-07-15", "Autonomous truck jackknife on interstate",
         "A self-driving truck jackknifed on the interstate.", '["TuSimple"]', '["TuSimple"]', '["drivers"]'),
        ("104", "2024-10-03", "Robotaxi fleet outage injures passengers",
         "A fleet-wide software fault stranded vehicles in traffic.", '["Waymo"]', '["Waymo"]', '["riders"]'),
        ("105", "2024-05-05", "Facial recognition wrongful arrest",
         "Police relied on a face match to arrest the wrong person.", '["Police"]', '["Vendor"]', '["residents"]'),
        ("201", "2025-01-19", "Robotaxi struck cyclist at crosswalk",
         "A driverless car struck a cyclist.", '["Waymo"]', '["Waymo"]', '["cyclists"]'),
        ("202", "2025-03-30", "Autonomous bus collided with barrier",
         "A self-driving bus hit a barrier.", '["Transit"]', '["Vendor"]', '["passengers"]'),
        ("203", "2025-06-14", "Driverless taxi multi-car pileup",
         "A driverless taxi was involved in a pileup.", '["Zoox"]', '["Zoox"]', '["drivers"]'),
        ("204", "2025-09-08", "Robotaxi blocked ambulance and crashed",
         "A robotaxi blocked an ambulance then crashed.", '["Cruise"]', '["Cruise"]', '["patients"]'),
        ("205", "2025-11-11", "Chatbot gave wrong tax advice",
         "A tax chatbot misstated filing rules.", '["Agency"]', '["Vendor"]', '["taxpayers"]'),
    ]
    reports = [(str(1000 + i), row[0], f"News coverage of: {row[2]}.", f"https://example.org/{row[0]}")
               for i, row in enumerate(incidents)]
    write_aiid(root / "aiid", incidents, reports)

    config = {
        "id": "av-injury-damage",
        "subject": "autonomous vehicles (SAE Levels 3 through 5)",
        "opportunity": "operate on US public roads",
        "risk_event": "incidents involving injury or property damage",
        "timeframe": {"text": "million vehicle-miles per calendar year", "periods": [Y2024, Y2025],
                      "buffer_months": 3},
        "harm_unit": "incidents",
        "sources": [
            {"name": "nhtsa", "format": "canonical", "path": "nhtsa.jsonl", "tier": 1,
             "mandatory_reporting": True, "news_derived": False,
             "citation": "NHTSA standing general order crash reports"},
            {"name": "aiid", "format": "aiid", "path": "aiid", "tier": 2},
        ],
        "exposure": [
            {"name": "AVIA miles + Waymo growth", "period": Y2024, "value": 78e6, "role": "POINT_COMPONENT",
             "citation": "AVIA 2025; CNBC 2025"},
            {"name": "AVIA May 2024 estimate", "period": Y2024, "value": 75e6, "role": "LOWER",
             "citation": "AVIA 2025"},
            {"name": "point + 10%", "period": Y2024, "value": 86e6, "role": "UPPER", "citation": "assumption"},
            {"name": "AVIA miles + Waymo growth", "period": Y2025, "value": 156e6, "role": "POINT_COMPONENT",
             "citation": "AVIA 2025; CNBC 2025"},
            {"name": "AVIA May 2025 estimate", "period": Y2025, "value": 145e6, "role": "LOWER",
             "citation": "AVIA 2025"},
            {"name": "point + 10%", "period": Y2025, "value": 171e6, "role": "UPPER", "citation": "assumption"},
        ],
        "stub_rules": [
            {"keywords": ["ads crash report"], "s_match": "true", "r_match": "true", "lower": 1, "upper": 1},
            {"keywords": ["robotaxi rear-ended"], "lower": 1, "upper": 1},
            {"keywords": ["driverless shuttle"], "lower": 2, "upper": 2},
            {"keywords": ["autonomous truck"], "lower": 2, "upper": 2},
            {"keywords": ["fleet outage"], "lower": 10, "upper": 300},
            {"keywords": ["struck cyclist"], "lower": 5, "upper": 5},
            {"keywords": ["autonomous bus"], "lower": 8, "upper": 8},
            {"keywords": ["multi-car pileup"], "lower": 10, "upper": 10},
            {"keywords": ["blocked ambulance"], "lower": 14, "upper": 14},
        ],
        "settings": {"min_full": 3, "dead_band": 0.10},
    }
    write_config(root / "config.yaml", config)


def build_chatbot():
    root = HERE / "chatbot"
    root.mkdir(exist_ok=True)
    incidents, reports = [], []
    n = 0
    for year, count in ((2024, 2), (2025, 17)):
        for day in spread_dates(year, count):
            n += 1
            incidents.append((str(300 + n), day.isoformat(), f"Chatbot encouraged self-harm case {n}",
                              "A companion chatbot failed to discourage a user's self-harm plans.",
                              '["Companion app"]', '["Model vendor"]', '["users"]'))
    extras = [
        ("390", "2024-03-03", "Chatbot self-harm ambiguous case",
         "Unclear whether the user was in the US.", "[]", "[]", "[]"),
        ("391", "2024-06-06", "Deepfake robocall before election", "Voice clone robocall.", "[]", "[]", "[]"),
        ("392", "2025-02-02", "Hiring algorithm age bias", "Screening tool rejected older applicants.",
         "[]", "[]", "[]"),
    ]
    incidents.extend(extras)
    for i, row in enumerate(incidents):
        reports.append((str(5000 + i), row[0], "", ""))
        reports.append((str(6000 + i), row[0], f"Report text for {row[2]}.", f"https://example.org/r/{row[0]}"))
    write_aiid(root / "aiid", incidents, reports)

    rows = []
    n = 0
    for i, day in enumerate(spread_dates(2024, 8)):
        n += 1
        tag = "(2-3 persons)" if i == 0 else "(1-2 persons)"
        rows.append((f"oecd-{n:04d}", day.isoformat(), f"Conversational AI self-harm response {tag}",
                     "US user received responses that did not discourage self-harm.",
                     "physical/psychological injury", "United States"))
    for i, day in enumerate(spread_dates(2025, 55)):
        n += 1
        tag = {0: "(class A users)", 1: "(class B users)"}.get(i, "(1 person)")
        rows.append((f"oecd-{n:04d}", day.isoformat(), f"Conversational AI self-harm response {tag}",
                     "US user received responses that did not discourage self-harm.",
                     "physical/psychological injury", "United States"))
    rows += [
        ("oecd-9001", "2024-08-08", "Translation model mistranslates contract", "Commercial harm.",
         "economic", "Germany"),
        ("oecd-9002", "2025-04-04", "Recommendation engine amplified hate speech", "Content harm.",
         "psychological", "India"),
        ("oecd-9003", "", "Undated chatbot incident", "Record without a date.", "unknown", "United States"),
    ]
    with open(root / "oecd.csv", "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["id", "date", "title", "description", "harm_type", "country"])
        w.writerows(rows)

    config = {
        "id": "chatbot-self-harm",
        "subject": "people living in the United States",
        "opportunity": "use conversational AI systems for emotional support",
        "risk_event": "responses that encourage, or fail to discourage, suicidal ideation or self-harm",
        "timeframe": {"text": "calendar year", "periods": [Y2024, Y2025], "buffer_months": 3},
        "harm_unit": "affected persons",
        "notes": "OECD 2025 harm range mixes people and incidents; encoded as published.",
        "sources": [
            {"name": "aiid", "format": "aiid", "path": "aiid", "tier": 2},
            {"name": "oecd", "format": "oecd", "path": "oecd.csv", "tier": 2},
        ],
        "exposure": [
            {"name": "Pew: ChatGPT to learn new things", "period": Y2024, "value": 56.0e6,
             "role": "POINT_COMPONENT", "share_adjustment": 0.8, "citation": "Sidoti 2025; Fatjoe 2025"},
            {"name": "Pew: ChatGPT for entertainment", "period": Y2024, "value": 46.4e6,
             "role": "POINT_COMPONENT", "share_adjustment": 0.8, "citation": "Sidoti 2025; Fatjoe 2025"},
            {"name": "entertainment, 90% share", "period": Y2024, "value": 48.6e6, "role": "LOWER",
             "share_adjustment": 0.9, "citation": "Sidoti 2025"},
            {"name": "learning, 70% share", "period": Y2024, "value": 51.1e6, "role": "UPPER",
             "share_adjustment": 0.7, "citation": "Sidoti 2025"},
            {"name": "Pew: ChatGPT to learn new things", "period": Y2025, "value": 76.8e6,
             "role": "POINT_COMPONENT", "share_adjustment": 0.8, "citation": "Sidoti 2025; Fatjoe 2025"},
            {"name": "Pew: ChatGPT for entertainment", "period": Y2025, "value": 64.0e6,
             "role": "POINT_COMPONENT", "share_adjustment": 0.8, "citation": "Sidoti 2025; Fatjoe 2025"},
            {"name": "entertainment, 90% share", "period": Y2025, "value": 67.5e6, "role": "LOWER",
             "share_adjustment": 0.9, "citation": "Sidoti 2025"},
            {"name": "learning, 70% share", "period": Y2025, "value": 69.3e6, "role": "UPPER",
             "share_adjustment": 0.7, "citation": "Sidoti 2025"},
        ],
        "stub_rules": [
            {"keywords": ["chatbot encouraged self-harm"], "lower": 1, "upper": 1},
            {"keywords": ["self-harm ambiguous"], "s_match": "indeterminate", "r_match": "true",
             "lower": 1, "upper": 1},
            {"keywords": ["(2-3 persons)"], "lower": 2, "upper": 3},
            {"keywords": ["(1-2 persons)"], "lower": 1, "upper": 2},
            {"keywords": ["(class a users)"], "lower": 50000, "upper": 500000},
            {"keywords": ["(class b users)"], "lower": 49947, "upper": 499947},
            {"keywords": ["(1 person)"], "lower": 1, "upper": 1},
        ],
        "settings": {"min_full": 3, "dead_band": 0.10},
    }
    write_config(root / "config.yaml", config)


def build_appendix_b():
    root = HERE / "finance"
    root.mkdir(exist_ok=True)
    with open(root / "aiid.jsonl", "w", encoding="utf-8") as fh:
        for i, day in enumerate(["2023-05-01", "2024-02-01", "2024-06-01", "2024-09-01"]):
            fh.write(json.dumps({
                "incident_id": f"fin-{i + 1}", "date": day,
                "title": f"AI-enabled cyberattack on bank {i + 1}",
                "description": "Attackers used AI tooling against a large financial company.",
            }, sort_keys=True) + "\n")
    config = {
        "id": "finance-ai-cyberattacks",
        "subject": "financial companies (1000+ employees)",
        "opportunity": "operate globally",
        "risk_event": "companies affected by AI-enabled cyberattacks or malicious exploitation of systems",
        "timeframe": {"text": "calendar year", "periods": [Y2023, Y2024], "buffer_months": 3},
        "harm_unit": "incidents",
        "sources": [
            {"name": "aiid", "format": "canonical", "path": "aiid.jsonl", "tier": 2, "news_derived": True},
            {"name": "dbir-security-incidents", "tier": 2, "news_derived": False,
             "citation": "Verizon DBIR, finance sector, large organisations",
             "counts": [{"period": Y2023, "lower": 122}, {"period": Y2024, "lower": 134}]},
            {"name": "dbir-data-breaches", "tier": 2, "news_derived": False,
             "citation": "Verizon DBIR, finance sector, large organisations",
             "counts": [{"period": Y2023, "lower": 87}, {"period": Y2024, "lower": 117}]},
        ],
        "stub_rules": [{"keywords": ["ai-enabled cyberattack"], "lower": 1, "upper": 1}],
    }
    write_config(root / "config.yaml", config)


def build_synth():
    root = HERE / "synth"
    root.mkdir(exist_ok=True)
    periods = [Y2024, Y2025]
    steady = {"detection": 0.9, "attribution": 0.8, "recording": 0.95, "disclosure": 0.8, "capture": 0.9,
              "scope": 0.95}
    configs = {
        # E doubles, hazard falls by a third: harm +33% vs exposure +100% -> Mitigating.
        "stable.json": {"periods": periods, "exposure_per_period": [1000, 2000],
                        "hazard_per_exposure": [0.15, 0.1], "funnel_stages": steady, "seed": 1000},
        # Both exposure and hazard double -> Escalating.
        "escalating.json": {"periods": periods, "exposure_per_period": [1000, 2000],
                            "hazard_per_exposure": [0.15, 0.3], "funnel_stages": steady, "seed": 2000},
        # Flat truth, detection improves from 0.2 to 0.8 between periods.
        "nonstationary.json": {"periods": periods, "exposure_per_period": [1000, 1000],
                               "hazard_per_exposure": [0.2, 0.2],
                               "funnel_stages": {**{s: 1.0 for s in steady}, "detection": [0.2, 0.8]},
                               "seed": 3000},
        # About one observed event per period.
        "sparse.json": {"periods": periods, "exposure_per_period": [100, 200],
                        "hazard_per_exposure": [0.02, 0.02], "funnel_stages": steady, "seed": 4000},
    }
    for name, data in configs.items():
        with open(root / name, "w", encoding="utf-8") as fh:
            json.dump(data, fh, indent=2)
            fh.write("\n")


if __name__ == "__main__":
    build_av()
    build_chatbot()
    build_appendix_b()
    build_synth()
