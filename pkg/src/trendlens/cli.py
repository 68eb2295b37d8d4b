"""Command-line entry point.

Exit codes: 0 success, 1 validation failure, 2 input error, 3 stage failure.

Examples::

    trendlens validate fixtures/av/config.yaml
    trendlens run fixtures/av/config.yaml --out runs/av --normalize-timestamps
    trendlens run mq.yaml --database aiid=snap/ --format aiid --frequency yearly
    trendlens agreement sample --run-dir runs/av --k 5 --seed 7 --out sample/
    trendlens agreement score --rater-a a.jsonl --rater-b b.jsonl --mapping sample/mapping.json
    trendlens synth fixtures/synth/stable.json --n-runs 200
    trendlens registry add runs/av/report.json --registry reg/
"""

from __future__ import annotations

import argparse
import datetime as dt
import json
import logging
import sys
from pathlib import Path
from typing import List, Optional, Sequence

from trendlens import agreement, registry
from trendlens.assessor import DEFAULT_BASE_URL, DEFAULT_MODEL, Assessment, RemoteBackend, RunLog, stub_backend
from trendlens.errors import (
    Aborted,
    InvalidPeriodSpec,
    LengthMismatch,
    MalformedConfig,
    MissingField,
    TrendlensError,
)
from trendlens.ingest import write_canonical
from trendlens.mq import Period, PeriodSpec, derive_periods, parse_mq, wizard
from trendlens.pipeline import Settings, load_run_config, open_databases, run_pipeline
from trendlens.report import atomic_write, build_report, dumps, to_markdown

EXIT_OK, EXIT_INVALID, EXIT_INPUT, EXIT_STAGE = 0, 1, 2, 3

logger = logging.getLogger("trendlens")


class StageError(Exception):
    def __init__(self, stage: str, exc: BaseException):
        super().__init__(f"[{stage}] {type(exc).__name__}: {exc}")
        self.stage = stage


def _err(message: str) -> None:
    print(f"error: {message}", file=sys.stderr)


def cmd_validate(args) -> int:
    try:
        text = Path(args.config).read_text(encoding="utf-8")
    except OSError as exc:
        _err(str(exc))
        return EXIT_INPUT
    try:
        mq = parse_mq(text)
    except MalformedConfig as exc:
        _err(f"malformed config: {exc}")
        return EXIT_INPUT
    except MissingField as exc:
        print(f"invalid: missing {exc.field}")
        return EXIT_INVALID
    except (InvalidPeriodSpec, TrendlensError) as exc:
        print(f"invalid: {exc}")
        return EXIT_INVALID
    print(mq.render())
    print("valid")
    return EXIT_OK


def cmd_wizard(args) -> int:
    try:
        wizard(args.out, mq_id=args.id, frequency=args.frequency)
    except Aborted as exc:
        _err(str(exc))
        return EXIT_INVALID
    return EXIT_OK


def _parse_databases(names: Sequence[str], formats: Sequence[str]):
    if formats and len(formats) not in (1, len(names)):
        raise ValueError("give one --format for all databases or one per --database")
    out = []
    for i, spec in enumerate(names):
        name, _, path = spec.partition("=")
        if not path:
            name, path = Path(spec).stem, spec
        fmt = formats[i] if len(formats) > 1 else (formats[0] if formats else "canonical")
        out.append((name, path, fmt))
    return out


def _stage(name, fn, *a, **kw):
    try:
        return fn(*a, **kw)
    except (TrendlensError, OSError, ValueError, KeyError) as exc:
        raise StageError(name, exc) from exc


def cmd_run(args) -> int:
    try:
        config = load_run_config(args.config)
    except OSError as exc:
        _err(str(exc))
        return EXIT_INPUT
    except MalformedConfig as exc:
        _err(f"malformed config: {exc}")
        return EXIT_INPUT
    except TrendlensError as exc:
        print(f"invalid: {exc}")
        return EXIT_INVALID

    settings = config.settings
    overrides = {}
    if args.min_full is not None:
        overrides["min_full"] = args.min_full
    if args.dead_band is not None:
        overrides["dead_band"] = args.dead_band
    if args.include_report:
        overrides["include_report"] = True
    if overrides:
        settings = Settings(**{**settings.__dict__, **overrides})
        config = config.__class__(**{**config.__dict__, "settings": settings})

    try:
        spec = config.mq.timeframe
        if args.periods:
            parts = args.periods.split(",")
            spec = PeriodSpec(explicit_periods=tuple(Period.parse(p) for p in parts))
        elif args.frequency:
            spec = PeriodSpec(frequency=args.frequency, buffer_months=spec.buffer_months)
        run_date = dt.date.fromisoformat(args.run_date) if args.run_date else dt.date.today()
        periods = derive_periods(spec, run_date)
        extra = _parse_databases(args.database or [], args.format or [])
    except (TrendlensError, ValueError) as exc:
        _err(str(exc))
        return EXIT_INPUT

    try:
        if args.backend == "remote":
            backend = _stage("assess", RemoteBackend, args.model, base_url=args.base_url)
        else:
            backend = stub_backend(config.stub_rules)
        databases = _stage("load", open_databases, config, extra)
        run_log = RunLog()
        result = _stage("pipeline", run_pipeline, config, periods, databases, backend, run_log=run_log)
        report = _stage("report", build_report, result, backend_id=backend.backend_id,
                        config_digest=config.digest, settings=settings,
                        normalize=args.normalize_timestamps, seed=args.seed)
    except StageError as exc:
        _err(str(exc))
        return EXIT_STAGE

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    assessments = sorted(((e.source, a) for e in result.evidence for a in e.assessments),
                         key=lambda pair: (pair[0], pair[1].incident_id))
    atomic_write(out / "assessments.jsonl", "".join(
        json.dumps({"source": src, **a.to_dict()}, sort_keys=True, ensure_ascii=False) + "\n"
        for src, a in assessments))
    assessed_ids = {a.incident_id for _, a in assessments}
    records = sorted((r for ds in databases.values() for r in ds.records if r.incident_id in assessed_ids),
                     key=lambda r: r.incident_id)
    write_canonical(records, out / "incidents.jsonl")
    run_log.write(out / "run_log.jsonl")
    atomic_write(out / "report.json", dumps(report))
    atomic_write(out / "report.md", to_markdown(report))
    traj = report["trajectory"]
    print(f"{config.mq.id}: {traj['category']} (E {traj['e_direction']}, Ĥ {traj['hhat_direction']})"
          + ("; absolute harm still rising" if traj["absolute_harm_warning"] else ""))
    print(f"report written to {out / 'report.json'}")
    return EXIT_OK


def _read_assessments(path) -> List[Assessment]:
    with open(path, encoding="utf-8") as fh:
        return [Assessment.from_dict(json.loads(line)) for line in fh if line.strip()]


def cmd_agreement_sample(args) -> int:
    run_dir = Path(args.run_dir)
    try:
        assessments = _read_assessments(run_dir / "assessments.jsonl")
        from trendlens.ingest import load_canonical

        incidents_path = run_dir / "incidents.jsonl"
        records = load_canonical(incidents_path).by_id() if incidents_path.exists() else {}
        sample = agreement.stratified_sample(assessments, args.k, args.seed, records, args.include_report)
    except (OSError, TrendlensError, ValueError) as exc:
        _err(str(exc))
        return EXIT_INPUT
    out = Path(args.out)
    atomic_write(out / "blinded.jsonl", sample.blinded_jsonl())
    atomic_write(out / "mapping.json", json.dumps(sample.mapping(), indent=2, sort_keys=True) + "\n")
    print(f"{len(sample.items)} items sampled (k={args.k}, seed={args.seed}) into {out}")
    return EXIT_OK


def cmd_agreement_score(args) -> int:
    try:
        key = "incident_id" if args.by_incident else "sample_id"
        a = agreement.read_labels(args.rater_a, key)
        b = agreement.read_labels(args.rater_b, key)
        strata = None
        if args.mapping:
            with open(args.mapping, encoding="utf-8") as fh:
                strata = {sid: item["stratum"] for sid, item in json.load(fh)["items"].items()}
        pairs = agreement.pair_labels(a, b, strata)
        report = agreement.agreement_report(pairs)
    except LengthMismatch as exc:
        _err(f"LengthMismatch: {exc}")
        return EXIT_INVALID
    except (OSError, TrendlensError, ValueError, KeyError) as exc:
        _err(str(exc))
        return EXIT_INPUT
    text = json.dumps(report.to_dict(), indent=2, sort_keys=True) + "\n"
    if args.out:
        atomic_write(args.out, text)
    print(text, end="")
    return EXIT_OK


def cmd_synth(args) -> int:
    from trendlens import synth

    if args.n_runs < 1:
        _err("--n-runs must be at least 1")
        return EXIT_INPUT
    try:
        config = synth.load_config(args.config)
    except (OSError, TrendlensError, ValueError) as exc:
        _err(str(exc))
        return EXIT_INPUT
    settings = Settings(min_full=args.min_full or 3, dead_band=args.dead_band or 0.10)
    report = synth.recovery_experiment(config, settings, args.n_runs, assessor_noise=args.noise)
    data = report.to_dict()
    print(f"true category:   {report.true_category.value}")
    print(f"recovery rate:   {report.recovery_rate:.3f}")
    print(f"abstention rate: {report.abstention_rate:.3f}")
    print("harm status over runs:")
    for status, count in sorted(report.harm_status_counts.items()):
        print(f"  {status:<12} {count:>5}  ({count / report.n_runs:.1%})")
    print("predicted categories:")
    for category, count in sorted(next(iter(report.confusion.values())).items()):
        print(f"  {category:<15} {count:>5}")
    if args.out:
        atomic_write(args.out, json.dumps(data, indent=2, sort_keys=True) + "\n")
    return EXIT_OK


def cmd_registry(args) -> int:
    try:
        if args.action == "add":
            registry.init(args.registry)
            with open(args.report, encoding="utf-8") as fh:
                report = json.load(fh)
            entry_id = registry.add(report, args.registry, entry_id=args.id, status=args.status,
                                    supersedes=args.supersedes)
            print(entry_id)
        elif args.action == "diff":
            t = registry.diff(args.registry, args.mq_id)
            print(f"{t.previous.value} -> {t.current.value}: {t.interpretation}")
        else:
            for e in registry.list_entries(args.registry):
                print(f"{e['entry_id']}\t{e['mq_id']}\t{e['status']}\t{e['category']}")
    except (OSError, TrendlensError, ValueError) as exc:
        _err(f"{type(exc).__name__}: {exc}")
        return EXIT_INVALID if isinstance(exc, TrendlensError) else EXIT_INPUT
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="trendlens", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("validate", help="check an MQ config and print its SORT sentence")
    p.add_argument("config")
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("wizard", help="build an MQ config interactively")
    p.add_argument("--out", default="mq.yaml")
    p.add_argument("--id")
    p.add_argument("--frequency", choices=("monthly", "quarterly", "yearly"), default="yearly")
    p.set_defaults(func=cmd_wizard)

    p = sub.add_parser("run", help="answer an MQ from incident databases")
    p.add_argument("config")
    p.add_argument("--database", action="append", help="NAME=PATH (repeatable)")
    p.add_argument("--format", action="append", choices=("aiid", "oecd", "canonical"))
    p.add_argument("--backend", choices=("stub", "remote"), default="stub")
    p.add_argument("--model", default=DEFAULT_MODEL)
    p.add_argument("--base-url", default=DEFAULT_BASE_URL)
    group = p.add_mutually_exclusive_group()
    group.add_argument("--periods", help="START..END,START..END")
    group.add_argument("--frequency", choices=("monthly", "quarterly", "yearly"))
    p.add_argument("--run-date", help="ISO date used to derive periods (default today)")
    p.add_argument("--seed", type=int, default=0, help="recorded for reproducibility")
    p.add_argument("--min-full", type=int)
    p.add_argument("--dead-band", type=float)
    p.add_argument("--include-report", action="store_true")
    p.add_argument("--normalize-timestamps", action="store_true")
    p.add_argument("--out", default="run")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("agreement", help="inter-assessor agreement")
    asub = p.add_subparsers(dest="mode", required=True)
    s = asub.add_parser("sample", help="stratified blinded sample from a run directory")
    s.add_argument("--run-dir", required=True)
    s.add_argument("--k", type=int, default=10)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--include-report", action="store_true")
    s.add_argument("--out", default="agreement-sample")
    s.set_defaults(func=cmd_agreement_sample)
    s = asub.add_parser("score", help="score two raters' labels")
    s.add_argument("--rater-a", required=True)
    s.add_argument("--rater-b", required=True)
    s.add_argument("--mapping", help="sealed mapping.json for per-stratum agreement")
    s.add_argument("--by-incident", action="store_true", help="join on incident_id (cross-run comparison)")
    s.add_argument("--out")
    s.set_defaults(func=cmd_agreement_score)

    p = sub.add_parser("synth", help="trend-recovery experiment on synthetic surveillance data")
    p.add_argument("config")
    p.add_argument("--n-runs", type=int, default=200)
    p.add_argument("--min-full", type=int)
    p.add_argument("--dead-band", type=float)
    p.add_argument("--noise", type=float, default=0.0)
    p.add_argument("--out")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("registry", help="repository of answered MQs")
    rsub = p.add_subparsers(dest="action", required=True)
    r = rsub.add_parser("add")
    r.add_argument("report")
    r.add_argument("--registry", required=True)
    r.add_argument("--id")
    r.add_argument("--status", choices=registry.STATUSES, default="PUBLISHED")
    r.add_argument("--supersedes")
    r = rsub.add_parser("diff")
    r.add_argument("mq_id")
    r.add_argument("--registry", required=True)
    r = rsub.add_parser("list")
    r.add_argument("--registry", required=True)
    p.set_defaults(func=cmd_registry)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.ERROR, format="%(levelname)s %(message)s")
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
