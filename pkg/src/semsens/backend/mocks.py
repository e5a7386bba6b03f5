"""Deterministic mock backends for tests and the self-test fixture.

Mocks ignore decoding controls; they answer purely from their scripts, so
pipelines built on them are reproducible bit for bit.
"""

from __future__ import annotations

import hashlib
import threading
import time
from typing import Any, Callable, Mapping, Sequence

from semsens.backend.client import PROMPT_TEMPLATE
from semsens.core import Label, LabelDistribution

_UNIFORM = LabelDistribution(1 / 3, 1 / 3, 1 / 3)

_PROMPT_PREFIX = PROMPT_TEMPLATE.split("{hypothesis}")[0]


def hypothesis_from_prompt(prompt: str) -> str:
    """Recover the hypothesis a generation prompt was assembled from."""
    if not prompt.startswith(_PROMPT_PREFIX):
        raise ValueError(f"prompt does not match the generation template: {prompt!r}")
    return prompt[len(_PROMPT_PREFIX):]


def stable_unit(token: str) -> float:
    """Deterministic, platform-stable float in [0, 1) derived from text."""
    digest = hashlib.sha256(token.encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "big") / 2**64


def scripted_distribution(label: Label, salt: str) -> LabelDistribution:
    """A valid distribution whose argmax is ``label``, varied by the salt.

    Top component stays in [0.55, 0.85], so the argmax is always unique.
    """
    u = stable_unit("top:" + salt)
    v = stable_unit("split:" + salt)
    top = 0.55 + 0.30 * u
    rest = 1.0 - top
    minor = rest * (0.25 + 0.50 * v)
    other = rest - minor
    components = [0.0, 0.0, 0.0]
    components[int(label)] = top
    remaining = [i for i in range(3) if i != int(label)]
    components[remaining[0]] = minor
    components[remaining[1]] = other
    return LabelDistribution(*components)


class TableClassifier:
    """Lookup-table classifier; unknown pairs get a configured default."""

    def __init__(
        self,
        table: Mapping[tuple[str, str], LabelDistribution],
        default: LabelDistribution = _UNIFORM,
    ):
        self._table = dict(table)
        self._default = default

    def classify(self, premise: str, hypothesis: str) -> LabelDistribution:
        return self._table.get((premise, hypothesis), self._default)


class RuleClassifier:
    """Classifier defined by an arbitrary (premise, hypothesis) function."""

    def __init__(self, rule: Callable[[str, str], LabelDistribution]):
        self._rule = rule

    def classify(self, premise: str, hypothesis: str) -> LabelDistribution:
        return self._rule(premise, hypothesis)


def symmetric_entailing_classifier() -> RuleClassifier:
    """Predicts entailment for every pair, both directions."""
    return RuleClassifier(lambda p, h: scripted_distribution(Label.ENTAILMENT, p + "\x1f" + h))


def asymmetric_classifier() -> RuleClassifier:
    """Entailment one way, neutral the other: defeats the symmetric check.

    Direction is decided by lexicographic order of the two texts, so the
    same pair always gets the same verdicts.
    """

    def rule(premise: str, hypothesis: str) -> LabelDistribution:
        label = Label.ENTAILMENT if premise < hypothesis else Label.NEUTRAL
        return scripted_distribution(label, premise + "\x1f" + hypothesis)

    return RuleClassifier(rule)


class HashClassifier:
    """Pseudo-random but deterministic classifier for property tests."""

    def __init__(self, seed: str = ""):
        self._seed = seed

    def classify(self, premise: str, hypothesis: str) -> LabelDistribution:
        salt = f"{self._seed}\x1f{premise}\x1f{hypothesis}"
        label = Label(int(stable_unit("label:" + salt) * 3))
        return scripted_distribution(label, salt)


class ScriptedGenerator:
    """Returns a fixed candidate list per hypothesis."""

    def __init__(
        self,
        table: Mapping[str, Sequence[str]] | None = None,
        fallback: Callable[[str, int], list[str]] | None = None,
    ):
        self._table = dict(table or {})
        self._fallback = fallback

    def generate(self, hypothesis: str, n: int) -> list[str]:
        if hypothesis in self._table:
            return list(self._table[hypothesis])
        if self._fallback is not None:
            return self._fallback(hypothesis, n)
        return [f"{hypothesis} (rewording {i})" for i in range(1, n + 1)]


class HashEmbedder:
    """Bag-of-hashed-tokens embedder: deterministic, fixed dimension."""

    def __init__(self, dim: int = 16):
        if dim < 1:
            raise ValueError("dim must be >= 1")
        self.dim = dim

    def embed(self, text: str) -> list[float]:
        vector = [0.0] * self.dim
        tokens = text.lower().split()
        for token in tokens:
            index = int(hashlib.sha256(token.encode("utf-8")).hexdigest(), 16) % self.dim
            vector[index] += 1.0
        # Length component keeps the vector non-zero even for odd inputs.
        vector[len(text) % self.dim] += 0.5
        return vector


class MockTransport:
    """Wire-shaped transport over scripted engines, with call accounting.

    Tracks total and per-capability call counts plus the maximum number of
    concurrently executing requests, so tests can assert both cache
    behavior (zero calls on a warm run) and in-flight limits.
    """

    def __init__(
        self,
        classifier=None,
        generator: ScriptedGenerator | None = None,
        embedder: HashEmbedder | None = None,
        latency: float = 0.0,
    ):
        self._classifier = classifier or HashClassifier()
        self._generator = generator or ScriptedGenerator()
        self._embedder = embedder or HashEmbedder()
        self._latency = latency
        self._lock = threading.Lock()
        self._concurrent = 0
        self.max_concurrent = 0
        self.calls_total = 0
        self.calls: dict[str, int] = {"nli": 0, "generate": 0, "embed": 0}

    def post(self, capability: str, payload: dict[str, Any]) -> Any:
        with self._lock:
            self._concurrent += 1
            self.max_concurrent = max(self.max_concurrent, self._concurrent)
            self.calls_total += 1
            self.calls[capability] = self.calls.get(capability, 0) + 1
        try:
            if self._latency:
                time.sleep(self._latency)
            if capability == "nli":
                dist = self._classifier.classify(payload["premise"], payload["hypothesis"])
                return {
                    "probs": {
                        "entailment": dist.p_entailment,
                        "neutral": dist.p_neutral,
                        "contradiction": dist.p_contradiction,
                    }
                }
            if capability == "generate":
                hypothesis = hypothesis_from_prompt(payload["prompt"])
                return {"candidates": self._generator.generate(hypothesis, payload["n"])}
            if capability == "embed":
                return {"vector": self._embedder.embed(payload["text"])}
            raise ValueError(f"unknown capability: {capability!r}")
        finally:
            with self._lock:
                self._concurrent -= 1
