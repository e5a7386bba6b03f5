"""Meaning-preserving hypothesis variations with acceptance filtering.

A candidate rewrite is accepted only when the classifier predicts
entailment in both directions between the original hypothesis and the
rewrite; bidirectional entailment is treated as logical equivalence.
Generation is refined in rounds until k accepted candidates exist or a
round budget runs out, so a stubborn record cannot livelock the pipeline.
"""

from __future__ import annotations

import hashlib
import unicodedata
from dataclasses import dataclass
from typing import Any, Callable, Iterable, Protocol

from semsens.backend.config import GenerationParams
from semsens.core import (
    Classifier,
    Label,
    LabelDistribution,
    NLIRecord,
    Prediction,
    nfc,
    normalize_whitespace,
)

# Defaults for the refinement loop: up to 10 rounds of 8 candidates each.
DEFAULT_ROUND_BUDGET = 10
DEFAULT_ROUND_SIZE = 8


class Generator(Protocol):
    """Anything that proposes rewrites of a hypothesis."""

    def generate_candidates(self, hypothesis: str, params: GenerationParams) -> list[str]: ...


def dedup_key(text: str) -> str:
    """Canonical form used only for deduplication.

    Lowercase, NFC, whitespace collapse, and terminal punctuation stripped;
    the surface text itself is preserved for evaluation.
    """
    canon = normalize_whitespace(nfc(text)).lower()
    end = len(canon)
    while end > 0 and unicodedata.category(canon[end - 1]).startswith("P"):
        end -= 1
    return canon[:end].rstrip()


@dataclass(frozen=True, slots=True)
class VariationCandidate:
    """One generated rewrite with its two-direction acceptance evidence."""

    record_id: str
    index: int
    text: str
    forward: LabelDistribution
    backward: LabelDistribution
    accepted: bool
    generation_round: int

    def __post_init__(self) -> None:
        both_entail = (
            self.forward.argmax() is Label.ENTAILMENT
            and self.backward.argmax() is Label.ENTAILMENT
        )
        if self.accepted != both_entail:
            raise ValueError(
                f"candidate {self.record_id}/{self.index}: accepted={self.accepted} "
                f"but evidence says {both_entail}"
            )

    def to_payload(self) -> dict[str, Any]:
        return {
            "index": self.index,
            "text": self.text,
            "forward": self.forward.to_payload(),
            "backward": self.backward.to_payload(),
            "accepted": self.accepted,
            "generation_round": self.generation_round,
        }

    @classmethod
    def from_payload(cls, record_id: str, payload: dict[str, Any]) -> "VariationCandidate":
        return cls(
            record_id=record_id,
            index=payload["index"],
            text=payload["text"],
            forward=LabelDistribution.from_payload(payload["forward"]),
            backward=LabelDistribution.from_payload(payload["backward"]),
            accepted=payload["accepted"],
            generation_round=payload["generation_round"],
        )


@dataclass(frozen=True, slots=True)
class VariationSet:
    """Accepted candidates for one record, plus refinement bookkeeping."""

    record_id: str
    dataset_id: str
    candidates: tuple[VariationCandidate, ...]
    shortfall: bool
    rounds_used: int

    def __post_init__(self) -> None:
        keys = [dedup_key(c.text) for c in self.candidates]
        if len(set(keys)) != len(keys):
            raise ValueError(f"variation set {self.record_id}: duplicate candidate texts")
        if any(not c.accepted for c in self.candidates):
            raise ValueError(f"variation set {self.record_id}: contains rejected candidates")

    @property
    def excluded(self) -> bool:
        """True when no candidate survived: the record leaves the evaluation."""
        return not self.candidates

    def to_payload(self) -> dict[str, Any]:
        return {
            "record_id": self.record_id,
            "dataset_id": self.dataset_id,
            "candidates": [c.to_payload() for c in self.candidates],
            "shortfall": self.shortfall,
            "rounds_used": self.rounds_used,
            "excluded": self.excluded,
        }

    @classmethod
    def from_payload(cls, payload: dict[str, Any]) -> "VariationSet":
        return cls(
            record_id=payload["record_id"],
            dataset_id=payload["dataset_id"],
            candidates=tuple(
                VariationCandidate.from_payload(payload["record_id"], c)
                for c in payload["candidates"]
            ),
            shortfall=payload["shortfall"],
            rounds_used=payload["rounds_used"],
        )


def filter_correct(
    records: Iterable[NLIRecord],
    classifier: Classifier,
) -> tuple[list[tuple[NLIRecord, Prediction]], float]:
    """Keep records the classifier answers correctly; report the accuracy.

    The prediction is retained alongside each kept record so later stages
    reuse it instead of re-classifying.
    """
    records = list(records)
    if not records:
        raise ValueError("filter_correct requires at least one record")
    kept: list[tuple[NLIRecord, Prediction]] = []
    for record in records:
        try:
            distribution = classifier.classify(record.premise, record.hypothesis)
        except Exception as exc:
            raise RuntimeError(f"classification failed for record {record.record_id!r}: {exc}") from exc
        prediction = Prediction.from_distribution(record.record_id, distribution)
        if prediction.predicted is record.gold:
            kept.append((record, prediction))
    return kept, len(kept) / len(records)


def check_equivalence(
    hypothesis: str,
    candidate: str,
    classifier: Classifier,
) -> tuple[bool, LabelDistribution, LabelDistribution]:
    """Symmetric-entailment check between the original and a rewrite.

    Returns the acceptance flag plus both directional distributions as
    evidence, so the verdict can be re-derived offline.
    """
    if not normalize_whitespace(hypothesis) or not normalize_whitespace(candidate):
        raise ValueError("check_equivalence requires non-empty texts")
    forward = classifier.classify(hypothesis, candidate)
    backward = classifier.classify(candidate, hypothesis)
    accepted = (
        forward.argmax() is Label.ENTAILMENT and backward.argmax() is Label.ENTAILMENT
    )
    return accepted, forward, backward


def temperature_for_round(
    seed: int,
    record_id: str,
    round_number: int,
    temperature_range: tuple[float, float],
) -> float:
    """Deterministic per-round decoding temperature within the range.

    Varying the temperature across refinement rounds re-samples the
    generator with fresh decoding randomness while keeping every round
    reproducible (and separately cacheable) for a fixed seed.
    """
    lo, hi = temperature_range
    if not lo <= hi:
        raise ValueError(f"invalid temperature range: {temperature_range}")
    token = f"{seed}:{record_id}:{round_number}"
    unit = int.from_bytes(hashlib.sha256(token.encode("utf-8")).digest()[:8], "big") / 2**64
    return lo + (hi - lo) * unit


def acquire_variations(
    record: NLIRecord,
    prediction: Prediction,
    k: int,
    budget: int,
    generator: Generator,
    classifier: Classifier,
    params_for_round: Callable[[int], GenerationParams],
) -> VariationSet:
    """Collect up to k accepted variations within a round budget.

    Each round asks the generator for rewrites, deduplicates them against
    the parent hypothesis and everything already seen, and runs the
    symmetric-entailment check on the survivors.  ``prediction`` is the
    stored original verdict for this record; it travels with the set's
    provenance but plays no role in acceptance.  A set with zero accepted
    candidates marks the record as excluded, which is an outcome, not an
    error.
    """
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    if budget < 1:
        raise ValueError(f"budget must be >= 1, got {budget}")
    if prediction.record_id != record.record_id:
        raise ValueError(
            f"prediction {prediction.record_id!r} does not belong to record {record.record_id!r}"
        )

    seen = {dedup_key(record.hypothesis)}
    accepted: list[VariationCandidate] = []
    rounds_used = 0
    for round_number in range(1, budget + 1):
        rounds_used = round_number
        params = params_for_round(round_number)
        try:
            proposals = generator.generate_candidates(record.hypothesis, params)
        except Exception as exc:
            raise RuntimeError(
                f"generation failed for record {record.record_id!r} "
                f"round {round_number}: {exc}"
            ) from exc
        for text in proposals:
            key = dedup_key(text)
            if not key or key in seen:
                continue
            seen.add(key)
            ok, forward, backward = check_equivalence(record.hypothesis, text, classifier)
            if ok:
                accepted.append(
                    VariationCandidate(
                        record_id=record.record_id,
                        index=len(accepted) + 1,
                        text=text,
                        forward=forward,
                        backward=backward,
                        accepted=True,
                        generation_round=round_number,
                    )
                )
                if len(accepted) == k:
                    break
        if len(accepted) == k:
            break

    return VariationSet(
        record_id=record.record_id,
        dataset_id=record.dataset_id,
        candidates=tuple(accepted),
        shortfall=len(accepted) < k,
        rounds_used=rounds_used,
    )
