"""Shim configuration: model roster, devices, label ordering."""

from __future__ import annotations

from dataclasses import dataclass

# Response keys are fixed by the wire protocol regardless of how any
# particular checkpoint orders its output classes.
WIRE_LABELS = ("entailment", "neutral", "contradiction")

# Published NLI checkpoints disagree on logit order, so the
# index-to-label mapping is configuration, never code.
DEFAULT_NLI_LABEL_ORDER = ("contradiction", "neutral", "entailment")


@dataclass(frozen=True, slots=True)
class ShimConfig:
    """Model identifiers and decoding defaults for the three capabilities.

    The declared model ids must match what clients put in their requests;
    the server rejects mismatches so response caches keyed on (model,
    inputs) can never go stale silently.
    """

    nli_model: str = "facebook/bart-large-mnli"
    generate_model: str = "google/flan-t5-xl"
    embed_model: str = "sentence-transformers/all-MiniLM-L6-v2"
    device: str = "cpu"
    nli_label_order: tuple[str, ...] = DEFAULT_NLI_LABEL_ORDER
    max_candidates: int = 16
    hard_token_cap: int = 256

    def __post_init__(self) -> None:
        if sorted(self.nli_label_order) != sorted(WIRE_LABELS):
            raise ValueError(
                f"nli_label_order must be a permutation of {WIRE_LABELS}, "
                f"got {self.nli_label_order}"
            )
        if self.max_candidates < 1:
            raise ValueError("max_candidates must be >= 1")

    def model_for(self, capability: str) -> str:
        return {
            "nli": self.nli_model,
            "generate": self.generate_model,
            "embed": self.embed_model,
        }[capability]
