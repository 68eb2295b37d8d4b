"""File-based repository of answered monitoring questions.

Layout::

    registry_dir/
      index.json            # derived summary, rebuilt after every add
      entries/<entry_id>.json

Entry files are created with a hard link from a temp file, which fails if the
id already exists, so concurrent writers can never overwrite each other.
"""

from __future__ import annotations

import json
import os
import tempfile
import time
from pathlib import Path
from typing import List, Optional

from trendlens.classify import TrajectoryResult, Transition, transition
from trendlens.errors import DuplicateEntry, SingleEntry, UnknownMq
from trendlens.report import atomic_write, check_report

STATUSES = ("DRAFT", "PUBLISHED")


def init(registry_dir) -> Path:
    root = Path(registry_dir)
    (root / "entries").mkdir(parents=True, exist_ok=True)
    if not (root / "index.json").exists():
        atomic_write(root / "index.json", json.dumps({"entries": []}, indent=2) + "\n")
    return root


def _entries_dir(registry_dir) -> Path:
    path = Path(registry_dir) / "entries"
    if not path.is_dir():
        raise FileNotFoundError(f"{registry_dir} is not an initialised registry")
    return path


def load_entries(registry_dir) -> List[dict]:
    entries = []
    for path in sorted(_entries_dir(registry_dir).glob("*.json")):
        with open(path, encoding="utf-8") as fh:
            entries.append(json.load(fh))
    return entries


def _summaries(registry_dir) -> List[dict]:
    return [
        {
            "entry_id": e["entry_id"],
            "mq_id": e["report"]["mq"]["id"],
            "status": e["status"],
            "category": e["report"]["trajectory"]["category"],
            "supersedes": e.get("supersedes"),
            "created_ns": e["created_ns"],
        }
        for e in sorted(load_entries(registry_dir), key=_order_key)
    ]


def _rebuild_index(registry_dir) -> None:
    summary = _summaries(registry_dir)
    atomic_write(Path(registry_dir) / "index.json", json.dumps({"entries": summary}, indent=2) + "\n")


def add(report: dict, registry_dir, *, entry_id: Optional[str] = None, status: str = "PUBLISHED",
        supersedes: Optional[str] = None) -> str:
    if status not in STATUSES:
        raise ValueError(f"status must be one of {STATUSES}")
    check_report(report)
    entries_dir = _entries_dir(registry_dir)
    created_ns = time.time_ns()
    entry_id = entry_id or f"{report['mq']['id']}-{created_ns}"
    if supersedes is not None and not (entries_dir / f"{supersedes}.json").exists():
        raise UnknownMq(f"superseded entry {supersedes!r} does not exist")
    entry = {
        "entry_id": entry_id,
        "status": status,
        "supersedes": supersedes,
        "created_ns": created_ns,
        "report": report,
    }
    target = entries_dir / f"{entry_id}.json"
    fd, tmp = tempfile.mkstemp(dir=entries_dir, prefix=".new-", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as fh:
            json.dump(entry, fh, indent=2, sort_keys=True, ensure_ascii=False)
            fh.write("\n")
        try:
            os.link(tmp, target)
        except FileExistsError:
            raise DuplicateEntry(f"entry {entry_id!r} already exists") from None
    finally:
        os.unlink(tmp)
    _rebuild_index(registry_dir)
    return entry_id


def _order_key(entry: dict):
    period_end = entry["report"]["periods"][-1]["end"]
    return (period_end, entry["created_ns"], entry["entry_id"])


def history(registry_dir, mq_id: str, published_only: bool = True) -> List[dict]:
    found = [e for e in load_entries(registry_dir) if e["report"]["mq"]["id"] == mq_id]
    if not found:
        raise UnknownMq(mq_id)
    if published_only:
        found = [e for e in found if e["status"] == "PUBLISHED"]
    return sorted(found, key=_order_key)


def diff(registry_dir, mq_id: str) -> Transition:
    """Transition between the two most recent published answers for ``mq_id``."""
    entries = history(registry_dir, mq_id)
    if len(entries) < 2:
        raise SingleEntry(f"{mq_id} has {len(entries)} published entr{'y' if len(entries) == 1 else 'ies'}")
    prev, curr = (TrajectoryResult.from_dict(e["report"]["trajectory"]) for e in entries[-2:])
    return transition(prev, curr)


def list_entries(registry_dir) -> List[dict]:
    # Read the entry files, not index.json: a concurrent add may have rebuilt the index from a stale view.
    return _summaries(registry_dir)
