"""Human evaluation of variation quality: task sampling, judgment
persistence, and two-annotator agreement.

Judgments land in an append-only journal; live state is a fold over it
with last-write-wins per (task, annotator), so resubmissions replace and
a crash can never lose acknowledged work.
"""

from __future__ import annotations

import json
import math
import random
import threading
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Iterable, Mapping, Sequence

from semsens.core import NLIRecord
from semsens.variation import VariationSet


class AnnotationError(Exception):
    """Sampling or agreement computation could not proceed."""


@dataclass(frozen=True, slots=True)
class AnnotationTask:
    """One (original hypothesis, variant) pair put in front of annotators."""

    task_id: str
    dataset_id: str
    record_id: str
    candidate_index: int
    hypothesis: str
    variant: str

    def to_payload(self) -> dict[str, Any]:
        return {
            "task_id": self.task_id,
            "dataset_id": self.dataset_id,
            "record_id": self.record_id,
            "candidate_index": self.candidate_index,
            "hypothesis": self.hypothesis,
            "variant": self.variant,
        }

    @classmethod
    def from_payload(cls, payload: Mapping[str, Any]) -> "AnnotationTask":
        return cls(
            task_id=payload["task_id"],
            dataset_id=payload["dataset_id"],
            record_id=payload["record_id"],
            candidate_index=payload["candidate_index"],
            hypothesis=payload["hypothesis"],
            variant=payload["variant"],
        )


@dataclass(frozen=True, slots=True)
class Judgment:
    """One annotator's verdict on one task; later submissions replace."""

    task_id: str
    annotator_id: str
    equivalent: bool
    timestamp: float
    comment: str = ""

    def to_payload(self) -> dict[str, Any]:
        return {
            "task_id": self.task_id,
            "annotator_id": self.annotator_id,
            "equivalent": self.equivalent,
            "timestamp": self.timestamp,
            "comment": self.comment,
        }

    @classmethod
    def from_payload(cls, payload: Mapping[str, Any]) -> "Judgment":
        return cls(
            task_id=payload["task_id"],
            annotator_id=payload["annotator_id"],
            equivalent=bool(payload["equivalent"]),
            timestamp=float(payload["timestamp"]),
            comment=payload.get("comment", ""),
        )


def sample_for_annotation(
    sets: Iterable[VariationSet],
    records: Mapping[str, NLIRecord],
    n: int,
    seed: int,
) -> list[AnnotationTask]:
    """Seeded sample of n accepted candidates, stratified per dataset.

    Dataset quotas are proportional to pool sizes (largest-remainder
    rounding); the same seed always yields the same tasks.
    """
    pools: dict[str, list[AnnotationTask]] = {}
    for vset in sets:
        record = records.get(vset.record_id)
        if record is None:
            raise AnnotationError(f"no record stored for variation set {vset.record_id!r}")
        for candidate in vset.candidates:
            task = AnnotationTask(
                task_id=f"{vset.dataset_id}:{vset.record_id}:{candidate.index}",
                dataset_id=vset.dataset_id,
                record_id=vset.record_id,
                candidate_index=candidate.index,
                hypothesis=record.hypothesis,
                variant=candidate.text,
            )
            pools.setdefault(vset.dataset_id, []).append(task)

    total = sum(len(pool) for pool in pools.values())
    if total < n:
        raise AnnotationError(f"need {n} candidates to sample but only {total} exist")

    quotas = _largest_remainder_quotas({ds: len(pool) for ds, pool in pools.items()}, n)
    rng = random.Random(seed)
    tasks: list[AnnotationTask] = []
    for dataset_id in sorted(pools):
        pool = pools[dataset_id]
        take = quotas[dataset_id]
        if take == 0:
            continue
        indices = sorted(rng.sample(range(len(pool)), take))
        tasks.extend(pool[i] for i in indices)
    return tasks


def _largest_remainder_quotas(sizes: Mapping[str, int], n: int) -> dict[str, int]:
    total = sum(sizes.values())
    shares = {ds: n * size / total for ds, size in sizes.items()}
    quotas = {ds: min(int(share), sizes[ds]) for ds, share in shares.items()}
    leftover = n - sum(quotas.values())
    # Hand remaining slots to the largest fractional remainders (ties by id).
    order = sorted(
        sizes,
        key=lambda ds: (-(shares[ds] - int(shares[ds])), ds),
    )
    idx = 0
    while leftover > 0:
        ds = order[idx % len(order)]
        if quotas[ds] < sizes[ds]:
            quotas[ds] += 1
            leftover -= 1
        idx += 1
    return quotas


# ---------------------------------------------------------------------------
# Judgment journal
# ---------------------------------------------------------------------------


class JudgmentJournal:
    """Append-only JSONL store of judgments with last-write-wins folding."""

    def __init__(self, path: str | Path):
        self._path = Path(path)
        self._lock = threading.Lock()
        self._live: dict[tuple[str, str], Judgment] = {}
        if self._path.exists():
            for line in self._path.read_text(encoding="utf-8").splitlines():
                if not line.strip():
                    continue
                judgment = Judgment.from_payload(json.loads(line))
                self._live[(judgment.task_id, judgment.annotator_id)] = judgment

    def append(self, judgment: Judgment) -> None:
        with self._lock:
            with self._path.open("a", encoding="utf-8") as handle:
                handle.write(
                    json.dumps(judgment.to_payload(), sort_keys=True, ensure_ascii=False) + "\n"
                )
            self._live[(judgment.task_id, judgment.annotator_id)] = judgment

    def record(self, task_id: str, annotator_id: str, equivalent: bool, comment: str = "") -> Judgment:
        judgment = Judgment(task_id, annotator_id, equivalent, time.time(), comment)
        self.append(judgment)
        return judgment

    def live_judgments(self) -> dict[tuple[str, str], Judgment]:
        with self._lock:
            return dict(self._live)

    def judged_tasks(self, annotator_id: str) -> set[str]:
        with self._lock:
            return {task for task, annot in self._live if annot == annotator_id}

    def annotators(self) -> list[str]:
        with self._lock:
            return sorted({annot for _, annot in self._live})


# ---------------------------------------------------------------------------
# Agreement
# ---------------------------------------------------------------------------


@dataclass(frozen=True, slots=True)
class AgreementReport:
    percent_agreement: float
    kappa: float
    n: int

    def to_payload(self) -> dict[str, Any]:
        return {"percent_agreement": self.percent_agreement, "kappa": self.kappa, "n": self.n}


def cohens_kappa(a: Sequence[bool], b: Sequence[bool]) -> float:
    """Chance-corrected agreement between two aligned binary vectors.

    kappa = (p_o - p_e) / (1 - p_e) with p_e from the marginal products.
    Degenerate marginals (p_e == 1) can only occur with perfect observed
    agreement and return 1.
    """
    if len(a) != len(b):
        raise AnnotationError(f"judgment vectors differ in length: {len(a)} vs {len(b)}")
    if not a:
        raise AnnotationError("cohens_kappa requires at least one paired judgment")
    n = len(a)
    p_observed = sum(x == y for x, y in zip(a, b)) / n
    pa_yes = sum(a) / n
    pb_yes = sum(b) / n
    p_expected = pa_yes * pb_yes + (1 - pa_yes) * (1 - pb_yes)
    if math.isclose(p_expected, 1.0, abs_tol=1e-15):
        return 1.0
    return (p_observed - p_expected) / (1 - p_expected)


def agreement_report(judgments: Mapping[tuple[str, str], Judgment]) -> AgreementReport:
    """Percent agreement and kappa over tasks judged by both annotators.

    Exactly two annotators must be present, and they must share at least
    one judged task.
    """
    annotators = sorted({annotator for _, annotator in judgments})
    if len(annotators) != 2:
        raise AnnotationError(
            f"agreement needs exactly two annotators, found {len(annotators)}: {annotators}"
        )
    first, second = annotators
    tasks_first = {task for task, annot in judgments if annot == first}
    tasks_second = {task for task, annot in judgments if annot == second}
    common = sorted(tasks_first & tasks_second)
    if not common:
        raise AnnotationError("annotators share no judged tasks")
    a = [judgments[(task, first)].equivalent for task in common]
    b = [judgments[(task, second)].equivalent for task in common]
    percent = 100.0 * sum(x == y for x, y in zip(a, b)) / len(common)
    return AgreementReport(percent_agreement=percent, kappa=cohens_kappa(a, b), n=len(common))


def export_judgments(judgments: Mapping[tuple[str, str], Judgment]) -> str:
    """All live judgments as a tab-delimited table, stable order."""
    lines = ["task_id\tannotator_id\tequivalent\ttimestamp\tcomment"]
    for (task_id, annotator_id) in sorted(judgments):
        j = judgments[(task_id, annotator_id)]
        lines.append(
            f"{task_id}\t{annotator_id}\t{str(j.equivalent).lower()}\t{j.timestamp!r}\t{j.comment}"
        )
    return "\n".join(lines) + "\n"
