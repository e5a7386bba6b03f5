"""Independent brute-force oracles and synthetic-instance builders.

The oracle enumerates every record/candidate combination directly from raw
labels; it shares no code with the aggregation logic under test.
"""

from __future__ import annotations

import random

from semsens.backend.mocks import scripted_distribution
from semsens.core import Label, Prediction
from semsens.metrics import EvaluationPair, flip_type


def oracle_is_strict(original: Label, varied: Label) -> bool:
    if original is Label.ENTAILMENT:
        return varied is Label.CONTRADICTION
    if original is Label.CONTRADICTION:
        return varied is Label.ENTAILMENT
    return varied is not Label.NEUTRAL


def oracle_rates(records: list[tuple[Label, list[Label]]]):
    """records: (original label, [per-candidate varied labels])."""
    n = len(records)
    relaxed = sum(1 for orig, cands in records if any(v is not orig for v in cands))
    strict = sum(1 for orig, cands in records if any(oracle_is_strict(orig, v) for v in cands))
    per_class = {}
    for label in Label:
        group = [(orig, cands) for orig, cands in records if orig is label]
        if not group:
            continue
        g_relaxed = sum(1 for orig, cands in group if any(v is not orig for v in cands))
        g_strict = sum(
            1 for orig, cands in group if any(oracle_is_strict(orig, v) for v in cands)
        )
        per_class[label] = (len(group), g_strict / len(group), g_relaxed / len(group))
    return relaxed / n, strict / n, per_class


# Reusable prediction pool keeps pair construction cheap in randomized runs.
_PREDICTIONS = {
    label: [
        Prediction.from_distribution("pool", scripted_distribution(label, f"{label}:{i}"))
        for i in range(7)
    ]
    for label in Label
}


def synth_pairs(records: list[tuple[Label, list[Label]]], dataset_id: str = "ds"):
    pairs = []
    for ridx, (orig_label, cand_labels) in enumerate(records):
        record_id = f"{dataset_id}-r{ridx}"
        original = _PREDICTIONS[orig_label][ridx % 7]
        for j, varied_label in enumerate(cand_labels, start=1):
            varied = _PREDICTIONS[varied_label][(ridx + j) % 7]
            pairs.append(
                EvaluationPair(
                    record_id=record_id,
                    dataset_id=dataset_id,
                    candidate_index=j,
                    original=Prediction(record_id, original.distribution, original.predicted),
                    variation=Prediction(record_id, varied.distribution, varied.predicted),
                    flip=flip_type(original.predicted, varied.predicted),
                )
            )
    return pairs


def random_instance(rng: random.Random, max_records: int = 60):
    n = rng.randint(1, max_records)
    records = []
    for _ in range(n):
        orig = Label(rng.randrange(3))
        cands = [Label(rng.randrange(3)) for _ in range(rng.randint(1, 5))]
        records.append((orig, cands))
    return records
