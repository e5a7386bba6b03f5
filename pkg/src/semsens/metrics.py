"""Flip classification and fooling-rate computation.

A record counts toward the relaxed rate when at least one of its accepted
variants changes the predicted label, and toward the strict rate when at
least one flips the prediction to its direct opposite
(entailment <-> contradiction).  Neutral has no direct opposite, so any
change away from a neutral prediction counts as strict; this makes the
strict and relaxed rates coincide for neutral groups and guarantees
r_strict <= r_relaxed <= 1 everywhere.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Any, Iterable, Mapping, Sequence

from semsens.core import (
    Classifier,
    Label,
    NLIRecord,
    Prediction,
    opposite_label,
)
from semsens.variation import VariationSet


class FlipType(str, enum.Enum):
    NONE = "none"
    RELAXED = "relaxed"
    STRICT = "strict"


def flip_type(original: Label, varied: Label) -> FlipType:
    """Classify a prediction change between the original and a variant."""
    if original is varied:
        return FlipType.NONE
    opposite = opposite_label(original)
    if opposite is None or varied is opposite:
        # Any change off a neutral original is strict; E/C must swap exactly.
        return FlipType.STRICT
    return FlipType.RELAXED


@dataclass(frozen=True, slots=True)
class EvaluationPair:
    """One (original prediction, variation prediction) comparison."""

    record_id: str
    dataset_id: str
    candidate_index: int
    original: Prediction
    variation: Prediction
    flip: FlipType

    def to_payload(self) -> dict[str, Any]:
        return {
            "record_id": self.record_id,
            "dataset_id": self.dataset_id,
            "candidate_index": self.candidate_index,
            "original": self.original.to_payload(),
            "variation": self.variation.to_payload(),
            "flip": self.flip.value,
        }

    @classmethod
    def from_payload(cls, payload: dict[str, Any]) -> "EvaluationPair":
        return cls(
            record_id=payload["record_id"],
            dataset_id=payload["dataset_id"],
            candidate_index=payload["candidate_index"],
            original=Prediction.from_payload(payload["original"]),
            variation=Prediction.from_payload(payload["variation"]),
            flip=FlipType(payload["flip"]),
        )


@dataclass(frozen=True, slots=True)
class ClassRates:
    """Fooling rates for records sharing one original label."""

    n_records: int
    strict: float
    relaxed: float

    def to_payload(self) -> dict[str, Any]:
        return {"n_records": self.n_records, "strict": self.strict, "relaxed": self.relaxed}


@dataclass(frozen=True, slots=True)
class FoolingRates:
    """Record-level fooling rates over one grouping of evaluation pairs.

    ``strict`` and ``relaxed`` are None (undefined) rather than 0.0 when no
    records were evaluated.
    """

    n_evaluated: int
    strict: float | None
    relaxed: float | None
    per_class: Mapping[Label, ClassRates]
    excluded: int = 0

    def __post_init__(self) -> None:
        if self.strict is not None and self.relaxed is not None:
            if not (0.0 <= self.strict <= self.relaxed <= 1.0):
                raise ValueError(
                    f"rate ordering violated: strict={self.strict} relaxed={self.relaxed}"
                )

    def to_payload(self) -> dict[str, Any]:
        return {
            "n_evaluated": self.n_evaluated,
            "strict": self.strict,
            "relaxed": self.relaxed,
            "per_class": {str(label): rates.to_payload() for label, rates in self.per_class.items()},
            "excluded": self.excluded,
        }


class MissingOriginalError(KeyError):
    """A variation set references a record with no stored prediction."""


def evaluate_variations(
    sets: Iterable[VariationSet],
    originals: Mapping[str, tuple[NLIRecord, Prediction]],
    classifier: Classifier,
) -> list[EvaluationPair]:
    """Re-classify (premise, variant) for every accepted candidate.

    Sets with no accepted candidates contribute no pairs; they are counted
    separately by the caller.
    """
    pairs: list[EvaluationPair] = []
    for vset in sets:
        if vset.record_id not in originals:
            raise MissingOriginalError(
                f"no original prediction stored for record {vset.record_id!r}"
            )
        record, original = originals[vset.record_id]
        for candidate in vset.candidates:
            try:
                distribution = classifier.classify(record.premise, candidate.text)
            except Exception as exc:
                raise RuntimeError(
                    f"classification failed for record {vset.record_id!r} "
                    f"candidate {candidate.index}: {exc}"
                ) from exc
            variation = Prediction.from_distribution(record.record_id, distribution)
            pairs.append(
                EvaluationPair(
                    record_id=record.record_id,
                    dataset_id=record.dataset_id,
                    candidate_index=candidate.index,
                    original=original,
                    variation=variation,
                    flip=flip_type(original.predicted, variation.predicted),
                )
            )
    return pairs


def fooling_rates(pairs: Sequence[EvaluationPair], excluded: int = 0) -> FoolingRates:
    """Aggregate pairs into record-level strict/relaxed fooling rates.

    A record is fooled (relaxed) if any of its candidates changed the
    predicted label, and fooled strictly if any candidate produced a strict
    flip.  Per-class rates group records by their original predicted label,
    which equals the gold label when evaluation runs on correctly-answered
    records only.
    """
    by_record: dict[str, list[EvaluationPair]] = {}
    for pair in pairs:
        by_record.setdefault(pair.record_id, []).append(pair)

    n = len(by_record)
    if n == 0:
        return FoolingRates(0, None, None, per_class={}, excluded=excluded)

    relaxed_hits = 0
    strict_hits = 0
    class_totals: dict[Label, list[int]] = {}
    for record_pairs in by_record.values():
        label = record_pairs[0].original.predicted
        changed = any(p.flip is not FlipType.NONE for p in record_pairs)
        strict = any(p.flip is FlipType.STRICT for p in record_pairs)
        relaxed_hits += changed
        strict_hits += strict
        bucket = class_totals.setdefault(label, [0, 0, 0])
        bucket[0] += 1
        bucket[1] += strict
        bucket[2] += changed

    per_class = {
        label: ClassRates(total, s_hits / total, r_hits / total)
        for label, (total, s_hits, r_hits) in sorted(class_totals.items())
    }
    return FoolingRates(
        n_evaluated=n,
        strict=strict_hits / n,
        relaxed=relaxed_hits / n,
        per_class=per_class,
        excluded=excluded,
    )


def weighted_average(rates: Sequence[FoolingRates]) -> tuple[float, float]:
    """(strict, relaxed) mean weighted by each grouping's evaluated count.

    Groupings with zero evaluated records are ignored; all-zero input is an
    error because the average would be undefined.
    """
    weighted = [(r.n_evaluated, r.strict, r.relaxed) for r in rates if r.n_evaluated > 0]
    if not weighted:
        raise ValueError("weighted_average requires at least one non-empty grouping")
    total = sum(n for n, _, _ in weighted)
    strict = math.fsum(n * s for n, s, _ in weighted) / total
    relaxed = math.fsum(n * r for n, _, r in weighted) / total
    return strict, relaxed
