"""File handoff between pipeline stages.

Every stage reads its predecessors' files from the run directory and
writes its own, which makes expensive runs resumable and every reported
number traceable to an artifact.  JSON is serialized canonically (sorted
keys, fixed separators) so unchanged inputs reproduce identical bytes.
"""

from __future__ import annotations

import hashlib
import json
import os
from pathlib import Path
from typing import Any, Iterable

RECORDS = "records.jsonl"
INGEST_REPORT = "ingest_report.json"
FILTERED = "filtered.jsonl"
FILTER_REPORT = "filter_report.json"
VARIATIONS = "variations.jsonl"
VARIATION_REPORT = "variation_report.json"
PAIRS = "pairs.jsonl"
RATES = "rates.jsonl"
ANALYSIS = "analysis.json"
REPORT_JSON = "report.json"
REPORT_MD = "report.md"
RATES_CSV = "rates.csv"
RUN_LOG = "run_log.json"

# Deterministic data artifacts; RUN_LOG is deliberately absent (it carries
# wall-clock timings and cache hit counts, which vary between runs).
DETERMINISTIC_ARTIFACTS = (
    RECORDS,
    INGEST_REPORT,
    FILTERED,
    FILTER_REPORT,
    VARIATIONS,
    VARIATION_REPORT,
    PAIRS,
    RATES,
    ANALYSIS,
    REPORT_JSON,
    REPORT_MD,
    RATES_CSV,
)


class MissingStageOutputError(FileNotFoundError):
    """A stage was asked to run before its inputs exist."""


def dumps_canonical(obj: Any) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), ensure_ascii=False)


def _replace_atomically(path: Path, text: str) -> None:
    # Stage outputs appear complete or not at all; a crash mid-write must
    # never leave a torn file that a later stage would trust.
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text(text, encoding="utf-8")
    os.replace(tmp, path)


def write_json(path: Path, obj: Any) -> None:
    _replace_atomically(
        path, json.dumps(obj, sort_keys=True, indent=2, ensure_ascii=False) + "\n"
    )


def read_json(path: Path) -> Any:
    if not path.exists():
        raise MissingStageOutputError(f"missing stage output: {path}")
    return json.loads(path.read_text(encoding="utf-8"))


def write_jsonl(path: Path, payloads: Iterable[Any]) -> int:
    lines = [dumps_canonical(payload) for payload in payloads]
    _replace_atomically(path, "".join(line + "\n" for line in lines))
    return len(lines)


def read_jsonl(path: Path) -> list[Any]:
    if not path.exists():
        raise MissingStageOutputError(f"missing stage output: {path}")
    rows = []
    with path.open("r", encoding="utf-8") as handle:
        for line in handle:
            line = line.strip()
            if line:
                rows.append(json.loads(line))
    return rows


def file_digest(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()
