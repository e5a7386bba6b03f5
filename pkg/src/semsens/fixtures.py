"""Deterministic end-to-end fixture: a 60-record corpus plus scripted
mock backends whose outcomes are fixed by construction.

Two 30-record datasets share one per-index plan.  Within each dataset the
classifier answers 27 records correctly (accuracy 90.00%), two records
lose every candidate to the acceptance check (excluded), so 25 records are
evaluated; 10 of them carry at least one label change and 5 at least one
strict flip, making the designed fooling rates exactly 0.40 relaxed and
0.20 strict, per dataset and overall.
"""

from __future__ import annotations

import json
from pathlib import Path
from typing import Any, Mapping

from semsens.backend.mocks import (
    HashEmbedder,
    MockTransport,
    ScriptedGenerator,
    scripted_distribution,
)
from semsens.core import Label, LabelDistribution

DATASETS = ("alpha", "beta")
RECORDS_PER_DATASET = 30
K = 5
ROUND_BUDGET = 2
SEED = 20240

# Designed outcomes (per dataset and pooled, since datasets mirror).
EXPECTED_RELAXED = 0.40
EXPECTED_STRICT = 0.20
EXPECTED_ACCURACY = 0.90
EXPECTED_EVALUATED_PER_DATASET = 25
EXPECTED_EXCLUDED_PER_DATASET = 2
EXPECTED_SHORTFALL_PER_DATASET = 2

# Record indices the classifier answers wrong (one per gold class).
_WRONG = {3, 13, 23}
# Kept records whose candidates all fail the acceptance check.
_EXCLUDED = {6, 26}
# Kept records that reach the budget with only 3 accepted candidates.
_SHORTFALL = {8, 9}
# Accepted-candidate index -> label predicted for (premise, variant).
_FLIPS: dict[int, dict[int, Label]] = {
    0: {3: Label.CONTRADICTION},
    1: {5: Label.CONTRADICTION},
    2: {1: Label.NEUTRAL},
    4: {2: Label.NEUTRAL},
    10: {2: Label.CONTRADICTION},
    11: {4: Label.ENTAILMENT},
    12: {1: Label.CONTRADICTION, 5: Label.ENTAILMENT},
    20: {2: Label.NEUTRAL},
    21: {3: Label.NEUTRAL},
    22: {4: Label.NEUTRAL},
}

_SUBJECTS = (
    "gardener", "violinist", "courier", "teacher", "sailor",
    "baker", "surveyor", "nurse", "carpenter", "astronomer",
)
_PLACES = ("market", "harbor", "library", "orchard", "station", "workshop", "museum")
_ACTIONS = (
    "sorted the packages", "tuned an instrument", "repaired the fence",
    "read the charts", "watered the plants", "swept the floor",
    "checked the ledger", "labeled the crates",
)

_VARIANT_TEMPLATES = (
    "It seems {stem}.",
    "{stem}, by all accounts.",
    "Reportedly, {stem}.",
    "{stem}, in essence.",
    "To put it plainly, {stem}.",
    "{stem}, broadly speaking.",
    "As it happens, {stem}.",
    "{stem}, all told.",
)


def gold_label(index: int) -> Label:
    return Label(index // 10)


def _wrong_label(gold: Label) -> Label:
    return Label((int(gold) + 1) % 3)


def premise_text(dataset: str, index: int) -> str:
    return (
        f"The {_SUBJECTS[index % 10]} {_ACTIONS[index % 8]} "
        f"at the {dataset} {_PLACES[index % 7]} before noon."
    )


def hypothesis_text(dataset: str, index: int) -> str:
    return f"A {_SUBJECTS[index % 10]} was busy near the {dataset} {_PLACES[index % 7]}."


def variant_texts(hypothesis: str) -> list[str]:
    stem = hypothesis[:-1] if hypothesis.endswith(".") else hypothesis
    return [template.format(stem=stem) for template in _VARIANT_TEMPLATES]


def _accepted_positions(index: int) -> set[int]:
    if index in _EXCLUDED:
        return set()
    if index in _SHORTFALL:
        return {1, 2, 3}
    return {1, 2, 3, 4, 5}


class FixtureClassifier:
    """Table classifier that refuses unknown pairs.

    An unknown pair means the pipeline assembled a text the fixture never
    scripted (e.g. the prompt template drifted), which must fail loudly.
    """

    def __init__(self, table: Mapping[tuple[str, str], LabelDistribution]):
        self._table = dict(table)

    def classify(self, premise: str, hypothesis: str) -> LabelDistribution:
        try:
            return self._table[(premise, hypothesis)]
        except KeyError:
            raise ValueError(
                f"fixture classifier has no script for pair ({premise!r}, {hypothesis!r})"
            ) from None


def _classifier_table() -> dict[tuple[str, str], LabelDistribution]:
    table: dict[tuple[str, str], LabelDistribution] = {}
    for dataset in DATASETS:
        for index in range(RECORDS_PER_DATASET):
            gold = gold_label(index)
            premise = premise_text(dataset, index)
            hypothesis = hypothesis_text(dataset, index)
            predicted = _wrong_label(gold) if index in _WRONG else gold
            table[(premise, hypothesis)] = scripted_distribution(
                predicted, f"orig:{dataset}:{index}"
            )
            accepted = _accepted_positions(index)
            flips = _FLIPS.get(index, {})
            for position, variant in enumerate(variant_texts(hypothesis), start=1):
                if position in accepted:
                    forward_label = backward_label = Label.ENTAILMENT
                else:
                    mode = position % 3
                    if mode == 0:
                        forward_label, backward_label = Label.ENTAILMENT, Label.NEUTRAL
                    elif mode == 1:
                        forward_label, backward_label = Label.NEUTRAL, Label.ENTAILMENT
                    else:
                        forward_label, backward_label = Label.CONTRADICTION, Label.CONTRADICTION
                table[(hypothesis, variant)] = scripted_distribution(
                    forward_label, f"fwd:{dataset}:{index}:{position}"
                )
                table[(variant, hypothesis)] = scripted_distribution(
                    backward_label, f"bwd:{dataset}:{index}:{position}"
                )
                eval_label = flips.get(position, predicted)
                table[(premise, variant)] = scripted_distribution(
                    eval_label, f"eval:{dataset}:{index}:{position}"
                )
    return table


def _generator_table() -> dict[str, list[str]]:
    table: dict[str, list[str]] = {}
    for dataset in DATASETS:
        for index in range(RECORDS_PER_DATASET):
            hypothesis = hypothesis_text(dataset, index)
            table[hypothesis] = variant_texts(hypothesis)
    return table


def build_transport(latency: float = 0.0) -> MockTransport:
    """Wire-shaped mock transport over the scripted fixture engines."""
    return MockTransport(
        classifier=FixtureClassifier(_classifier_table()),
        generator=ScriptedGenerator(_generator_table()),
        embedder=HashEmbedder(dim=16),
        latency=latency,
    )


def materialize_corpus(corpus_dir: Path) -> list[dict[str, Any]]:
    """Write the corpus files and return their manifest payloads.

    alpha ships as newline-delimited JSON, beta as tab-delimited text, so a
    self-test run exercises both ingest formats; each file carries one row
    whose label maps to null and must be dropped.
    """
    corpus_dir.mkdir(parents=True, exist_ok=True)

    alpha_lines = []
    for index in range(RECORDS_PER_DATASET):
        alpha_lines.append(
            json.dumps(
                {
                    "pairID": f"alpha-{index:03d}",
                    "sentence1": premise_text("alpha", index),
                    "sentence2": hypothesis_text("alpha", index),
                    "gold_label": str(gold_label(index)),
                },
                ensure_ascii=False,
            )
        )
    alpha_lines.append(
        json.dumps(
            {
                "pairID": "alpha-disagreement",
                "sentence1": "The annotators could not settle this premise.",
                "sentence2": "This row must be dropped, not loaded.",
                "gold_label": "-",
            },
            ensure_ascii=False,
        )
    )
    (corpus_dir / "alpha.jsonl").write_text("\n".join(alpha_lines) + "\n", encoding="utf-8")

    beta_lines = ["idx\tpremise\thypothesis\tlabel"]
    for index in range(RECORDS_PER_DATASET):
        beta_lines.append(
            "\t".join(
                [
                    f"beta-{index:03d}",
                    premise_text("beta", index),
                    hypothesis_text("beta", index),
                    str(int(gold_label(index))),
                ]
            )
        )
    beta_lines.append(
        "\t".join(
            [
                "beta-disagreement",
                "The annotators could not settle this premise.",
                "This row must be dropped, not loaded.",
                "-",
            ]
        )
    )
    (corpus_dir / "beta.tsv").write_text("\n".join(beta_lines) + "\n", encoding="utf-8")

    return [
        {
            "dataset_id": "alpha",
            "path": "corpus/alpha.jsonl",
            "format": "jsonl",
            "premise_key": "sentence1",
            "hypothesis_key": "sentence2",
            "label_key": "gold_label",
            "record_id_key": "pairID",
            "label_map": {
                "entailment": "entailment",
                "neutral": "neutral",
                "contradiction": "contradiction",
                "-": None,
            },
            "sample_count": RECORDS_PER_DATASET,
        },
        {
            "dataset_id": "beta",
            "path": "corpus/beta.tsv",
            "format": "delimited",
            "delimiter": "\t",
            "premise_key": "premise",
            "hypothesis_key": "hypothesis",
            "label_key": "label",
            "record_id_key": "idx",
            "label_map": {
                "0": "entailment",
                "1": "neutral",
                "2": "contradiction",
                "-": None,
            },
            "sample_count": RECORDS_PER_DATASET,
        },
    ]


def fixture_config_payload(manifests: list[dict[str, Any]]) -> dict[str, Any]:
    """The run configuration used by the self-test."""
    return {
        "seed": SEED,
        "k": K,
        "refinement_budget": ROUND_BUDGET,
        "subset_mode": "sample",
        "workers": 2,
        "manifests": manifests,
        "backend": {
            "models": {
                "nli": "fixture-nli",
                "generate": "fixture-gen",
                "embed": "fixture-embed",
            },
            "timeout": 10,
            "max_inflight": 4,
            "retries": 2,
            "cache_path": "cache.jsonl",
        },
        "generation": {
            "num_candidates": 8,
            "temperature_range": [0.3, 0.6],
            "max_tokens": 40,
            "diversity_penalty": 0.5,
            "beam_groups": 4,
        },
    }


def write_fixture_tree(out_dir: Path) -> Path:
    """Materialize corpus plus config under ``out_dir``; returns config path."""
    manifests = materialize_corpus(out_dir / "corpus")
    config_path = out_dir / "config.json"
    config_path.write_text(
        json.dumps(fixture_config_payload(manifests), indent=2, sort_keys=True) + "\n",
        encoding="utf-8",
    )
    return config_path
