"""Domain types and label algebra shared by every pipeline stage.

The label space is fixed at three classes with a total ordering
(entailment < neutral < contradiction).  That ordering breaks argmax ties
and defines the axis along which discrete CDFs are built, so every module
must agree on it; nothing else in the pipeline is allowed to reorder
labels.
"""

from __future__ import annotations

import enum
import math
import unicodedata
from dataclasses import dataclass
from typing import Any, Protocol

# Backends return floating-point softmax values; exact sum-to-one is
# unrealistic, so distributions are accepted within this tolerance.
PROB_SUM_TOL = 1e-6


class Label(enum.IntEnum):
    """Three-way NLI verdict. Integer value encodes the fixed ordering."""

    ENTAILMENT = 0
    NEUTRAL = 1
    CONTRADICTION = 2

    def __str__(self) -> str:
        return self.name.lower()

    @classmethod
    def from_name(cls, name: str) -> "Label":
        try:
            return cls[name.strip().upper()]
        except KeyError:
            raise ValueError(f"unknown label name: {name!r}") from None


LABEL_ORDER: tuple[Label, Label, Label] = (
    Label.ENTAILMENT,
    Label.NEUTRAL,
    Label.CONTRADICTION,
)


def opposite_label(label: Label) -> Label | None:
    """Direct opposite of a label: entailment and contradiction swap.

    Neutral has no direct opposite and maps to None.
    """
    if label is Label.ENTAILMENT:
        return Label.CONTRADICTION
    if label is Label.CONTRADICTION:
        return Label.ENTAILMENT
    return None


def normalize_whitespace(text: str) -> str:
    """Trim and collapse every internal whitespace run to a single space."""
    return " ".join(text.split())


def nfc(text: str) -> str:
    """Unicode NFC normalization."""
    return unicodedata.normalize("NFC", text)


@dataclass(frozen=True, slots=True)
class LabelDistribution:
    """Softmax output over the three labels, validated on construction.

    Components must be non-negative finite reals summing to 1 within
    PROB_SUM_TOL; malformed tuples are rejected here so downstream code
    never has to re-check.
    """

    p_entailment: float
    p_neutral: float
    p_contradiction: float

    def __post_init__(self) -> None:
        comps = self.as_tuple()
        for value in comps:
            if not math.isfinite(value):
                raise ValueError(f"non-finite probability component: {value!r}")
            if value < 0:
                raise ValueError(f"negative probability component: {value!r}")
        total = math.fsum(comps)
        if abs(total - 1.0) > PROB_SUM_TOL:
            raise ValueError(f"probabilities sum to {total!r}, expected 1 ± {PROB_SUM_TOL}")

    def as_tuple(self) -> tuple[float, float, float]:
        return (self.p_entailment, self.p_neutral, self.p_contradiction)

    def __getitem__(self, label: Label) -> float:
        return self.as_tuple()[int(label)]

    def argmax(self) -> Label:
        """Label of the maximal component; ties go to the earliest label."""
        comps = self.as_tuple()
        best = 0
        for i in (1, 2):
            if comps[i] > comps[best]:
                best = i
        return Label(best)

    def to_payload(self) -> list[float]:
        return list(self.as_tuple())

    @classmethod
    def from_payload(cls, payload: Any) -> "LabelDistribution":
        if not isinstance(payload, (list, tuple)) or len(payload) != 3:
            raise ValueError(f"expected a 3-component list, got {payload!r}")
        return cls(float(payload[0]), float(payload[1]), float(payload[2]))


def argmax_label(distribution: LabelDistribution) -> Label:
    """Predicted label of a distribution under the fixed tie-break order."""
    return distribution.argmax()


@dataclass(frozen=True, slots=True)
class NLIRecord:
    """One premise/hypothesis/gold-label triple from a dataset.

    Surface text is stored untouched; only emptiness (after whitespace
    normalization) is rejected.
    """

    record_id: str
    dataset_id: str
    premise: str
    hypothesis: str
    gold: Label

    def __post_init__(self) -> None:
        if not self.record_id:
            raise ValueError("record_id must be non-empty")
        if not normalize_whitespace(self.premise):
            raise ValueError(f"record {self.record_id}: empty premise")
        if not normalize_whitespace(self.hypothesis):
            raise ValueError(f"record {self.record_id}: empty hypothesis")

    def to_payload(self) -> dict[str, Any]:
        return {
            "record_id": self.record_id,
            "dataset_id": self.dataset_id,
            "premise": self.premise,
            "hypothesis": self.hypothesis,
            "gold": str(self.gold),
        }

    @classmethod
    def from_payload(cls, payload: dict[str, Any]) -> "NLIRecord":
        return cls(
            record_id=payload["record_id"],
            dataset_id=payload["dataset_id"],
            premise=payload["premise"],
            hypothesis=payload["hypothesis"],
            gold=Label.from_name(payload["gold"]),
        )


@dataclass(frozen=True, slots=True)
class Prediction:
    """A classifier verdict: distribution plus its argmax label."""

    record_id: str
    distribution: LabelDistribution
    predicted: Label

    def __post_init__(self) -> None:
        if self.predicted is not self.distribution.argmax():
            raise ValueError(
                f"prediction {self.record_id}: predicted={self.predicted} "
                f"but argmax={self.distribution.argmax()}"
            )

    @classmethod
    def from_distribution(cls, record_id: str, distribution: LabelDistribution) -> "Prediction":
        return cls(record_id, distribution, distribution.argmax())

    def to_payload(self) -> dict[str, Any]:
        return {
            "record_id": self.record_id,
            "distribution": self.distribution.to_payload(),
            "predicted": str(self.predicted),
        }

    @classmethod
    def from_payload(cls, payload: dict[str, Any]) -> "Prediction":
        return cls(
            record_id=payload["record_id"],
            distribution=LabelDistribution.from_payload(payload["distribution"]),
            predicted=Label.from_name(payload["predicted"]),
        )


class Classifier(Protocol):
    """Anything that maps a premise/hypothesis pair to a distribution."""

    def classify(self, premise: str, hypothesis: str) -> LabelDistribution: ...


class Embedder(Protocol):
    """Anything that maps text to a fixed-dimension real vector."""

    def embed(self, text: str) -> list[float]: ...
