"""Model engines behind the wire endpoints.

The transformers/torch imports are deferred to construction time so the
server module (and its tests, which inject stub engines) never pull the
ML stack.
"""

from __future__ import annotations

import math
from typing import Protocol, Sequence

from nli_shim.config import WIRE_LABELS, ShimConfig


class EngineLoadError(RuntimeError):
    """A model failed to load at startup."""


class NliEngine(Protocol):
    def predict(self, premise: str, hypothesis: str) -> dict[str, float]: ...


class GenerateEngine(Protocol):
    def generate(
        self,
        prompt: str,
        n: int,
        temperature: float,
        max_tokens: int,
        diversity_penalty: float,
        beam_groups: int,
    ) -> list[str]: ...


class EmbedEngine(Protocol):
    def embed(self, text: str) -> list[float]: ...


def order_probs(raw: Sequence[float], label_order: Sequence[str]) -> dict[str, float]:
    """Map model-order probabilities onto the fixed wire keys.

    Normalizes so the response sums to one even if the softmax carries
    float dust.
    """
    if len(raw) != len(label_order):
        raise ValueError(f"{len(raw)} probabilities for {len(label_order)} labels")
    total = math.fsum(raw)
    if total <= 0:
        raise ValueError("probabilities sum to zero")
    by_label = {label: float(p) / total for label, p in zip(label_order, raw)}
    return {key: by_label[key] for key in WIRE_LABELS}


class TransformersNliEngine:
    """Sequence-classification checkpoint behind /v1/nli."""

    def __init__(self, config: ShimConfig):
        try:
            import torch
            from transformers import AutoModelForSequenceClassification, AutoTokenizer
        except ImportError as exc:
            raise EngineLoadError(f"transformers stack unavailable: {exc}") from exc
        try:
            self._tokenizer = AutoTokenizer.from_pretrained(config.nli_model)
            self._model = AutoModelForSequenceClassification.from_pretrained(config.nli_model)
        except Exception as exc:
            raise EngineLoadError(f"cannot load NLI model {config.nli_model!r}: {exc}") from exc
        self._model.to(config.device)
        self._model.eval()
        self._torch = torch
        self._label_order = config.nli_label_order
        self._device = config.device

    def predict(self, premise: str, hypothesis: str) -> dict[str, float]:
        inputs = self._tokenizer(
            premise, hypothesis, return_tensors="pt", truncation=True, max_length=512
        ).to(self._device)
        with self._torch.no_grad():
            logits = self._model(**inputs).logits[0]
        probs = self._torch.softmax(logits, dim=-1).tolist()
        return order_probs(probs, self._label_order)


class TransformersGenerateEngine:
    """Instruction-tuned seq2seq checkpoint behind /v1/generate.

    Uses group beam search: the beam count is rounded up to a multiple of
    the requested beam groups, diversity penalty applied across groups.
    """

    def __init__(self, config: ShimConfig):
        try:
            from transformers import AutoModelForSeq2SeqLM, AutoTokenizer
        except ImportError as exc:
            raise EngineLoadError(f"transformers stack unavailable: {exc}") from exc
        try:
            self._tokenizer = AutoTokenizer.from_pretrained(config.generate_model)
            self._model = AutoModelForSeq2SeqLM.from_pretrained(config.generate_model)
        except Exception as exc:
            raise EngineLoadError(
                f"cannot load generation model {config.generate_model!r}: {exc}"
            ) from exc
        self._model.to(config.device)
        self._model.eval()
        self._device = config.device
        self._hard_cap = config.hard_token_cap

    def generate(
        self,
        prompt: str,
        n: int,
        temperature: float,
        max_tokens: int,
        diversity_penalty: float,
        beam_groups: int,
    ) -> list[str]:
        groups = max(1, beam_groups)
        beams = max(n, groups)
        if beams % groups:
            beams += groups - beams % groups
        inputs = self._tokenizer(prompt, return_tensors="pt", truncation=True).to(self._device)
        outputs = self._model.generate(
            **inputs,
            num_return_sequences=n,
            num_beams=beams,
            num_beam_groups=groups,
            diversity_penalty=float(diversity_penalty),
            temperature=float(temperature),
            max_new_tokens=min(max_tokens, self._hard_cap),
            do_sample=False,
        )
        texts = self._tokenizer.batch_decode(outputs, skip_special_tokens=True)
        return [text.strip() for text in texts if text.strip()]


class SentenceEmbedEngine:
    """Sentence-embedding checkpoint behind /v1/embed."""

    def __init__(self, config: ShimConfig):
        try:
            from sentence_transformers import SentenceTransformer
        except ImportError as exc:
            raise EngineLoadError(f"sentence-transformers unavailable: {exc}") from exc
        try:
            self._model = SentenceTransformer(config.embed_model, device=config.device)
        except Exception as exc:
            raise EngineLoadError(
                f"cannot load embedding model {config.embed_model!r}: {exc}"
            ) from exc

    def embed(self, text: str) -> list[float]:
        return [float(v) for v in self._model.encode(text)]
