import json
import shutil
import threading

import pytest
import yaml

from trendlens import registry
from trendlens.cli import main
from trendlens.errors import DuplicateEntry, ReportSchemaError, SingleEntry, UnknownMq
from trendlens.report import CAVEAT_MONOTONIC, CAVEAT_PROPENSITY, atomic_write, check_report
from conftest import FIXTURES


def run(bundle, out, *extra):
    return main(["run", str(FIXTURES / bundle / "config.yaml"), "--normalize-timestamps", "--out", str(out), *extra])


@pytest.fixture(scope="module")
def av_report(tmp_path_factory):
    out = tmp_path_factory.mktemp("av")
    assert run("av", out) == 0
    return out, json.loads((out / "report.json").read_text())


def test_validate_exit_codes(tmp_path, capsys):
    assert main(["validate", str(FIXTURES / "av" / "config.yaml")]) == 0
    assert "Among autonomous vehicles" in capsys.readouterr().out
    cfg = yaml.safe_load((FIXTURES / "av" / "config.yaml").read_text())
    del cfg["risk_event"]
    (tmp_path / "no_r.yaml").write_text(yaml.safe_dump(cfg))
    assert main(["validate", str(tmp_path / "no_r.yaml")]) == 1
    assert "risk_event" in capsys.readouterr().out
    (tmp_path / "bad.yaml").write_text("subject: [oops")
    assert main(["validate", str(tmp_path / "bad.yaml")]) == 2
    assert main(["validate", str(tmp_path / "missing.yaml")]) == 2


def test_av_run(av_report):
    out, report = av_report
    traj = report["trajectory"]
    assert traj["category"] == "MITIGATING" and traj["absolute_harm_warning"] is True
    assert report["harm_outcome"]["source"] == "nhtsa"
    assert report["harm_outcome"]["growth_rate"] == pytest.approx(0.8536, abs=1e-3)
    assert report["exposure_outcome"]["growth_rate"] == pytest.approx(1.0)
    aiid = [b for b in report["harm_evidence"] if b["source"] == "aiid"]
    assert [(b["lower"], b["upper"]) for b in aiid] == [(15, 305), (37, 37)]
    for name in ("assessments.jsonl", "incidents.jsonl", "run_log.jsonl", "report.md"):
        assert (out / name).exists()
    assert CAVEAT_MONOTONIC in report["caveats"] and CAVEAT_PROPENSITY in report["caveats"]
    assert report["run_metadata"]["timestamp"] == "1970-01-01T00:00:00Z"
    assert report["run_metadata"]["backend_id"] == "stub@assess-v1"


def test_markdown_layout(av_report):
    md = (av_report[0] / "report.md").read_text()
    for heading in ("Monitoring question", "Harm estimation", "Exposure", "Classification"):
        assert heading in md
    assert "Mitigating" in md


def test_chatbot_run(tmp_path):
    assert run("chatbot", tmp_path) == 0
    report = json.loads((tmp_path / "report.json").read_text())
    assert report["trajectory"]["category"] == "ESCALATING"
    aiid = [b for b in report["harm_evidence"] if b["source"] == "aiid"]
    assert aiid[0]["full_count"] == 2 and aiid[0]["status"] == "ABSTAIN"
    assert report["harm_outcome"]["source"] == "oecd"
    assert [e["oom"] for e in report["exposure_estimates"]] == [8, 8]


def test_abstaining_source_without_fallback(tmp_path):
    cfg = yaml.safe_load((FIXTURES / "chatbot" / "config.yaml").read_text())
    cfg["sources"] = [s for s in cfg["sources"] if s["name"] == "aiid"]
    bundle = tmp_path / "bundle"
    shutil.copytree(FIXTURES / "chatbot" / "aiid", bundle / "aiid")
    (bundle / "config.yaml").write_text(yaml.safe_dump(cfg))
    assert main(["run", str(bundle / "config.yaml"), "--out", str(tmp_path / "out")]) == 0
    report = json.loads((tmp_path / "out" / "report.json").read_text())
    assert report["harm_outcome"]["status"] == "ABSTAIN"
    assert report["trajectory"]["category"] == "UNCLASSIFIABLE"


def test_finance_counts(tmp_path):
    assert run("finance", tmp_path) == 0
    report = json.loads((tmp_path / "report.json").read_text())
    growth = {b["source"]: b["growth_rate"] for b in report["harm_evidence"]}
    assert growth["dbir-security-incidents"] == pytest.approx(0.0984, abs=1e-3)
    assert growth["dbir-data-breaches"] == pytest.approx(0.3448, abs=1e-3)


def test_run_is_byte_identical(tmp_path):
    assert run("av", tmp_path / "a") == 0
    assert run("av", tmp_path / "b") == 0
    for name in ("report.json", "report.md", "assessments.jsonl", "run_log.jsonl"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_run_with_extra_database_and_frequency(tmp_path):
    code = main(["run", str(FIXTURES / "av" / "config.yaml"), "--database", f"extra={FIXTURES / 'av' / 'nhtsa.jsonl'}",
                 "--format", "canonical", "--frequency", "yearly", "--run-date", "2026-06-01",
                 "--out", str(tmp_path)])
    assert code == 0
    report = json.loads((tmp_path / "report.json").read_text())
    assert {b["source"] for b in report["harm_evidence"]} == {"nhtsa", "aiid", "extra"}


def test_run_bad_inputs(tmp_path):
    assert main(["run", str(tmp_path / "nope.yaml")]) == 2
    assert main(["run", str(FIXTURES / "av" / "config.yaml"), "--periods", "garbage", "--out", str(tmp_path)]) == 2
    code = main(["run", str(FIXTURES / "av" / "config.yaml"), "--database", f"x={tmp_path / 'missing.jsonl'}",
                 "--out", str(tmp_path)])
    assert code == 3


def test_remote_without_key_is_stage_failure(tmp_path, monkeypatch):
    monkeypatch.delenv("TRENDLENS_API_KEY", raising=False)
    assert run("av", tmp_path, "--backend", "remote") == 3


def test_agreement_sample_is_deterministic(av_report, tmp_path):
    run_dir = av_report[0]
    for name in ("a", "b"):
        assert main(["agreement", "sample", "--run-dir", str(run_dir), "--k", "3", "--seed", "7",
                     "--out", str(tmp_path / name)]) == 0
    for f in ("blinded.jsonl", "mapping.json"):
        assert (tmp_path / "a" / f).read_bytes() == (tmp_path / "b" / f).read_bytes()
    rows = [json.loads(x) for x in (tmp_path / "a" / "blinded.jsonl").read_text().splitlines()]
    assert len(rows) == 5  # 3 full, no partial, only 2 negatives in the AV bundle
    assert all(r["title"] for r in rows)


def test_agreement_score(tmp_path, capsys):
    rows = [{"sample_id": f"S{i}", "s_match": "TRUE", "r_match": v, "harm_lower": 1, "harm_upper": 1}
            for i, v in enumerate(["TRUE", "FALSE", "INDETERMINATE"])]
    text = "".join(json.dumps(r) + "\n" for r in rows)
    (tmp_path / "a.jsonl").write_text(text)
    (tmp_path / "b.jsonl").write_text(text)
    assert main(["agreement", "score", "--rater-a", str(tmp_path / "a.jsonl"), "--rater-b",
                 str(tmp_path / "b.jsonl"), "--out", str(tmp_path / "r.json")]) == 0
    rep = json.loads((tmp_path / "r.json").read_text())
    assert rep["kappa_s"] == rep["kappa_r"] == rep["kappa_full"] == 1.0
    (tmp_path / "c.jsonl").write_text(text.replace("S2", "S9"))
    assert main(["agreement", "score", "--rater-a", str(tmp_path / "a.jsonl"), "--rater-b",
                 str(tmp_path / "c.jsonl")]) == 1
    assert "LengthMismatch" in capsys.readouterr().err


def test_synth_cli(tmp_path, capsys):
    assert main(["synth", str(FIXTURES / "synth" / "escalating.json"), "--n-runs", "20",
                 "--out", str(tmp_path / "r.json")]) == 0
    out = capsys.readouterr().out
    assert "recovery rate" in out
    data = json.loads((tmp_path / "r.json").read_text())
    assert set(data) >= {"config_digest", "n_runs", "recovery_rate", "abstention_rate", "confusion"}
    assert main(["synth", str(FIXTURES / "synth" / "escalating.json"), "--n-runs", "0"]) == 2


def _with_category(report, category, e, h, end="2025-12-31"):
    r = json.loads(json.dumps(report))
    r["trajectory"].update(category=category, e_direction=e, hhat_direction=h)
    r["periods"][-1]["end"] = end
    return r


def test_registry_flow(av_report, tmp_path):
    report = av_report[1]
    reg = tmp_path / "reg"
    registry.init(reg)
    registry.add(_with_category(report, "ESCALATING", "UP", "UP", "2024-12-31"), reg, entry_id="e1")
    with pytest.raises(SingleEntry):
        registry.diff(reg, "av-injury-damage")
    registry.add(report, reg, entry_id="e2", supersedes="e1")
    t = registry.diff(reg, "av-injury-damage")
    assert (t.previous.value, t.current.value, t.interpretation) == (
        "ESCALATING", "MITIGATING", "possible successful intervention")
    with pytest.raises(DuplicateEntry):
        registry.add(report, reg, entry_id="e2")
    with pytest.raises(UnknownMq):
        registry.diff(reg, "nope")
    with pytest.raises(UnknownMq):
        registry.add(report, reg, entry_id="e3", supersedes="ghost")
    registry.add(report, reg, entry_id="draft", status="DRAFT")
    assert registry.diff(reg, "av-injury-damage").current.value == "MITIGATING"
    assert [e["entry_id"] for e in registry.list_entries(reg)] == ["e1", "e2", "draft"]
    index = json.loads((reg / "index.json").read_text())
    assert len(index["entries"]) == 3


def test_registry_cli(av_report, tmp_path, capsys):
    reg = str(tmp_path / "reg")
    path = str(av_report[0] / "report.json")
    assert main(["registry", "add", path, "--registry", reg, "--id", "one"]) == 0
    assert main(["registry", "add", path, "--registry", reg, "--id", "one"]) == 1
    assert main(["registry", "diff", "av-injury-damage", "--registry", reg]) == 1
    assert main(["registry", "list", "--registry", reg]) == 0
    assert "one\tav-injury-damage" in capsys.readouterr().out


def test_registry_concurrent_adds(av_report, tmp_path):
    reg = tmp_path / "reg"
    registry.init(reg)
    errors = []

    def worker(i):
        try:
            registry.add(av_report[1], reg, entry_id=f"w{i % 5}")
        except DuplicateEntry:
            errors.append(i)
    threads = [threading.Thread(target=worker, args=(i,)) for i in range(20)]
    for t in threads:
        t.start()
    for t in threads:
        t.join()
    assert len(errors) == 15
    assert sorted(e["entry_id"] for e in registry.list_entries(reg)) == [f"w{i}" for i in range(5)]


def test_schema_check_rejects_missing_caveat(av_report):
    bad = json.loads(json.dumps(av_report[1]))
    bad["caveats"] = ["something else"]
    with pytest.raises(ReportSchemaError):
        check_report(bad)


def test_atomic_write_leaves_no_temp(tmp_path):
    atomic_write(tmp_path / "x.json", "{}")
    atomic_write(tmp_path / "x.json", "[]")
    assert [p.name for p in tmp_path.iterdir()] == ["x.json"]
    assert (tmp_path / "x.json").read_text() == "[]"


def test_wizard_cli(tmp_path, monkeypatch):
    answers = iter(["S", "O", "R", "T", "incidents"])
    monkeypatch.setattr("builtins.input", lambda _p: next(answers))
    assert main(["wizard", "--out", str(tmp_path / "mq.yaml")]) == 0
    assert main(["validate", str(tmp_path / "mq.yaml")]) == 0
