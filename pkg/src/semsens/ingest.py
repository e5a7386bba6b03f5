"""Dataset loading: manifests, format adapters, and subset selection.

Datasets arrive either as newline-delimited JSON objects or as
header-bearing delimited text.  The manifest owns the field-name mapping
and the raw-label mapping table, because different distributions encode
the same three labels differently; a raw label mapped to null is dropped
and counted (annotator-disagreement markers), while an unmapped raw label
fails the load.
"""

from __future__ import annotations

import csv
import json
import random
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Iterable, Mapping, Sequence

from semsens.core import Label, NLIRecord

FORMAT_JSONL = "jsonl"
FORMAT_DELIMITED = "delimited"


class DatasetLoadError(Exception):
    """A dataset file failed to load; message names the offending spot."""


@dataclass(frozen=True, slots=True)
class DatasetManifest:
    """Everything needed to turn one file into NLIRecords.

    ``label_map`` keys are compared as strings, so integer-coded labels in
    JSON rows match their quoted manifest keys.  A null mapping value marks
    rows to drop.  ``record_id_key`` is optional; absent, ids are derived
    from the dataset id and line number.
    """

    dataset_id: str
    path: str
    format: str
    premise_key: str
    hypothesis_key: str
    label_key: str
    label_map: Mapping[str, Label | None]
    sample_count: int | None = None
    record_id_key: str | None = None
    delimiter: str = "\t"

    def __post_init__(self) -> None:
        if self.format not in (FORMAT_JSONL, FORMAT_DELIMITED):
            raise ValueError(f"unknown dataset format: {self.format!r}")
        if self.sample_count is not None and self.sample_count < 1:
            raise ValueError(f"sample_count must be positive, got {self.sample_count}")

    @classmethod
    def from_payload(cls, payload: Mapping[str, Any], base_dir: Path | None = None) -> "DatasetManifest":
        label_map: dict[str, Label | None] = {}
        for raw, mapped in payload["label_map"].items():
            label_map[str(raw)] = None if mapped is None else Label.from_name(mapped)
        path = payload["path"]
        if base_dir is not None and not Path(path).is_absolute():
            path = str(base_dir / path)
        return cls(
            dataset_id=payload["dataset_id"],
            path=path,
            format=payload["format"],
            premise_key=payload["premise_key"],
            hypothesis_key=payload["hypothesis_key"],
            label_key=payload["label_key"],
            label_map=label_map,
            sample_count=payload.get("sample_count"),
            record_id_key=payload.get("record_id_key"),
            delimiter=payload.get("delimiter", "\t"),
        )


@dataclass(frozen=True, slots=True)
class LoadReport:
    """Counts emitted after a dataset load."""

    dataset_id: str
    loaded: int
    dropped: int
    by_label: Mapping[str, int] = field(default_factory=dict)

    def to_payload(self) -> dict[str, Any]:
        return {
            "dataset_id": self.dataset_id,
            "loaded": self.loaded,
            "dropped": self.dropped,
            "by_label": dict(self.by_label),
        }


def _iter_rows(manifest: DatasetManifest) -> Iterable[tuple[int, Mapping[str, Any]]]:
    path = Path(manifest.path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise DatasetLoadError(f"{manifest.dataset_id}: cannot read {path}: {exc}") from exc

    if manifest.format == FORMAT_JSONL:
        for lineno, line in enumerate(text.splitlines(), start=1):
            if not line.strip():
                continue
            try:
                row = json.loads(line)
            except json.JSONDecodeError as exc:
                raise DatasetLoadError(
                    f"{manifest.dataset_id}: line {lineno}: malformed JSON ({exc.msg})"
                ) from exc
            if not isinstance(row, dict):
                raise DatasetLoadError(
                    f"{manifest.dataset_id}: line {lineno}: expected a JSON object"
                )
            yield lineno, row
    else:
        reader = csv.DictReader(text.splitlines(), delimiter=manifest.delimiter)
        if reader.fieldnames is None:
            raise DatasetLoadError(f"{manifest.dataset_id}: {path} has no header row")
        # DictReader consumes the header, so data starts at line 2.
        for lineno, row in enumerate(reader, start=2):
            if row.get(None):
                raise DatasetLoadError(
                    f"{manifest.dataset_id}: line {lineno}: more columns than header fields"
                )
            yield lineno, row


def load_dataset(manifest: DatasetManifest) -> tuple[list[NLIRecord], LoadReport]:
    """Load a dataset file into records in file order.

    Fails loudly on unmapped labels, missing keys, malformed rows, and
    duplicate record ids; null-mapped labels are dropped and counted.
    """
    records: list[NLIRecord] = []
    seen_ids: set[str] = set()
    dropped = 0
    by_label: Counter[str] = Counter()

    for lineno, row in _iter_rows(manifest):
        for key in (manifest.premise_key, manifest.hypothesis_key, manifest.label_key):
            if key not in row or row[key] is None:
                raise DatasetLoadError(
                    f"{manifest.dataset_id}: line {lineno}: missing key {key!r}"
                )
        raw_label = str(row[manifest.label_key])
        if raw_label not in manifest.label_map:
            raise DatasetLoadError(
                f"{manifest.dataset_id}: line {lineno}: unmapped label value {raw_label!r}"
            )
        gold = manifest.label_map[raw_label]
        if gold is None:
            dropped += 1
            continue

        if manifest.record_id_key is not None:
            if manifest.record_id_key not in row or row[manifest.record_id_key] is None:
                raise DatasetLoadError(
                    f"{manifest.dataset_id}: line {lineno}: missing key {manifest.record_id_key!r}"
                )
            record_id = str(row[manifest.record_id_key])
        else:
            record_id = f"{manifest.dataset_id}-{lineno:06d}"
        if record_id in seen_ids:
            raise DatasetLoadError(
                f"{manifest.dataset_id}: line {lineno}: duplicate record_id {record_id!r}"
            )
        seen_ids.add(record_id)

        try:
            record = NLIRecord(
                record_id=record_id,
                dataset_id=manifest.dataset_id,
                premise=str(row[manifest.premise_key]),
                hypothesis=str(row[manifest.hypothesis_key]),
                gold=gold,
            )
        except ValueError as exc:
            raise DatasetLoadError(f"{manifest.dataset_id}: line {lineno}: {exc}") from exc
        records.append(record)
        by_label[str(gold)] += 1

    if manifest.sample_count is not None and manifest.sample_count > len(records):
        raise DatasetLoadError(
            f"{manifest.dataset_id}: sample_count {manifest.sample_count} exceeds "
            f"{len(records)} available records"
        )
    report = LoadReport(
        dataset_id=manifest.dataset_id,
        loaded=len(records),
        dropped=dropped,
        by_label=dict(sorted(by_label.items())),
    )
    return records, report


def select_subset(
    records: Sequence[NLIRecord],
    n: int,
    seed: int,
    mode: str = "sample",
) -> list[NLIRecord]:
    """Deterministic evaluation subset of size n.

    "sample" draws a seeded pseudo-random sample (Mersenne Twister via
    ``random.Random(seed)``, index sampling) and keeps file order, so the
    same seed yields the same subset on every platform.  "prefix" takes the
    first n records.  Asking for n == len(records) returns the input order
    untouched in either mode.
    """
    if n > len(records):
        raise ValueError(f"requested subset of {n} from only {len(records)} records")
    if mode not in ("sample", "prefix"):
        raise ValueError(f"unknown subset mode: {mode!r}")
    if n == len(records):
        return list(records)
    if mode == "prefix":
        return list(records[:n])
    rng = random.Random(seed)
    indices = sorted(rng.sample(range(len(records)), n))
    return [records[i] for i in indices]
