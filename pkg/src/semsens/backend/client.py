"""High-level inference client: caching, concurrency limits, validation.

One client instance fronts all three capabilities.  Identical inputs are
served from the persistent response cache, so a warm re-run issues zero
network calls and recomputation stays byte-deterministic.
"""

from __future__ import annotations

import threading
from typing import Any

from semsens.backend.cache import CacheKey, ResponseCache, canonical_text, digest_inputs
from semsens.backend.config import BackendConfig, GenerationParams
from semsens.backend.transport import (
    EmptyGenerationError,
    MalformedResponseError,
    Transport,
)
from semsens.core import LabelDistribution, normalize_whitespace

# The instruction sent to the generation model, with the hypothesis
# substituted for the placeholder.  Mock transports parse the hypothesis
# back out of it, so the assembled form must stay bit-stable.
PROMPT_TEMPLATE = "Rephrase the following sentence while preserving its original meaning: {hypothesis}"

_PROB_KEYS = ("entailment", "neutral", "contradiction")


class InferenceClient:
    """Uniform access to classification, generation, and embedding."""

    def __init__(
        self,
        config: BackendConfig,
        transport: Transport,
        cache: ResponseCache | None = None,
    ):
        self._config = config
        self._transport = transport
        self._cache = cache if cache is not None else ResponseCache(config.cache_path)
        self._semaphore = threading.BoundedSemaphore(config.max_inflight)
        self._embed_dims: dict[str, int] = {}
        self._dim_lock = threading.Lock()

    @property
    def cache(self) -> ResponseCache:
        return self._cache

    def classify(self, premise: str, hypothesis: str) -> LabelDistribution:
        """Label distribution for a premise/hypothesis pair."""
        if not normalize_whitespace(premise) or not normalize_whitespace(hypothesis):
            raise ValueError("classify requires non-empty premise and hypothesis")
        model = self._config.model_for("nli")
        payload = {"premise": premise, "hypothesis": hypothesis, "model": model}
        digest = digest_inputs(
            {"premise": canonical_text(premise), "hypothesis": canonical_text(hypothesis)}
        )
        raw = self._fetch("nli", model, payload, digest)
        return parse_nli_response(raw)

    def generate_candidates(self, hypothesis: str, params: GenerationParams) -> list[str]:
        """Rewrites of the hypothesis, at most ``params.num_candidates``.

        Candidates come back trimmed and non-empty; duplicates are
        preserved (deduplication happens downstream).  An empty candidate
        list from the backend is retried within the configured budget and
        never cached.
        """
        if not normalize_whitespace(hypothesis):
            raise ValueError("generate_candidates requires a non-empty hypothesis")
        model = self._config.model_for("generate")
        prompt = PROMPT_TEMPLATE.format(hypothesis=hypothesis)
        payload = {
            "prompt": prompt,
            "n": params.num_candidates,
            "temperature": params.temperature,
            "max_tokens": params.max_tokens,
            "diversity_penalty": params.diversity_penalty,
            "beam_groups": params.beam_groups,
            "model": model,
        }
        digest = digest_inputs(
            {
                "prompt": canonical_text(prompt),
                "n": params.num_candidates,
                "temperature": params.temperature,
                "max_tokens": params.max_tokens,
                "diversity_penalty": params.diversity_penalty,
                "beam_groups": params.beam_groups,
            }
        )
        key = CacheKey("generate", model, digest)
        raw = self._cache.get(key)
        if raw is not None:
            return _parse_candidates(raw)

        last: list[str] = []
        for _ in range(self._config.retries + 1):
            with self._semaphore:
                raw = self._transport.post("generate", payload)
            last = _parse_candidates(raw)
            if last:
                self._cache.put(key, raw)
                return last[: params.num_candidates]
        raise EmptyGenerationError(
            f"generation backend returned no usable candidates for {hypothesis!r}"
        )

    def embed(self, text: str) -> list[float]:
        """Sentence embedding; dimension must stay consistent per model."""
        if not normalize_whitespace(text):
            raise ValueError("embed requires non-empty text")
        model = self._config.model_for("embed")
        payload = {"text": text, "model": model}
        digest = digest_inputs({"text": canonical_text(text)})
        raw = self._fetch("embed", model, payload, digest)
        vector = raw.get("vector") if isinstance(raw, dict) else None
        if (
            not isinstance(vector, list)
            or not vector
            or not all(isinstance(v, (int, float)) and not isinstance(v, bool) for v in vector)
        ):
            raise MalformedResponseError(f"embed response lacks a numeric vector: {raw!r}")
        with self._dim_lock:
            expected = self._embed_dims.setdefault(model, len(vector))
        if len(vector) != expected:
            raise MalformedResponseError(
                f"embedding dimension changed for model {model!r}: "
                f"{expected} then {len(vector)}"
            )
        return [float(v) for v in vector]

    def _fetch(self, capability: str, model: str, payload: dict[str, Any], digest: str) -> Any:
        key = CacheKey(capability, model, digest)
        raw = self._cache.get(key)
        if raw is not None:
            return raw
        with self._semaphore:
            raw = self._transport.post(capability, payload)
        self._cache.put(key, raw)
        return raw


def parse_nli_response(raw: Any) -> LabelDistribution:
    """Validate a /v1/nli response body and build a distribution.

    Exactly three probability keys are required; component and sum
    violations surface as MalformedResponseError.
    """
    probs = raw.get("probs") if isinstance(raw, dict) else None
    if not isinstance(probs, dict) or set(probs) != set(_PROB_KEYS):
        raise MalformedResponseError(
            f"nli response must carry probs for exactly {_PROB_KEYS}, got {raw!r}"
        )
    values = []
    for label_key in _PROB_KEYS:
        value = probs[label_key]
        if not isinstance(value, (int, float)) or isinstance(value, bool):
            raise MalformedResponseError(f"nli probability {label_key!r} is not numeric: {value!r}")
        values.append(float(value))
    try:
        return LabelDistribution(*values)
    except ValueError as exc:
        raise MalformedResponseError(f"invalid nli distribution {values}: {exc}") from exc


def _parse_candidates(raw: Any) -> list[str]:
    candidates = raw.get("candidates") if isinstance(raw, dict) else None
    if not isinstance(candidates, list) or not all(isinstance(c, str) for c in candidates):
        raise MalformedResponseError(f"generate response lacks a candidates list: {raw!r}")
    return [c.strip() for c in candidates if c.strip()]
