"""Configuration types for the inference backends."""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping

CAPABILITIES = ("nli", "generate", "embed")


@dataclass(frozen=True, slots=True)
class BackendConfig:
    """Connection settings shared by all capabilities.

    ``endpoints`` maps capability tags ("nli", "generate", "embed") to base
    URLs; it may be empty when a non-HTTP transport is injected.  ``models``
    maps the same tags to model identifier strings, which participate in
    cache keys.
    """

    endpoints: Mapping[str, str] = field(default_factory=dict)
    models: Mapping[str, str] = field(default_factory=dict)
    timeout: float = 30.0
    max_inflight: int = 4
    retries: int = 3
    retry_backoff: float = 0.5
    cache_path: str | Path | None = None

    def __post_init__(self) -> None:
        if self.timeout <= 0:
            raise ValueError(f"timeout must be positive, got {self.timeout}")
        if self.max_inflight < 1:
            raise ValueError(f"max_inflight must be >= 1, got {self.max_inflight}")
        if self.retries < 0:
            raise ValueError(f"retries must be >= 0, got {self.retries}")
        for capability in self.endpoints:
            if capability not in CAPABILITIES:
                raise ValueError(f"unknown capability in endpoints: {capability!r}")

    def model_for(self, capability: str) -> str:
        model = self.models.get(capability)
        if not model:
            raise ValueError(f"no model configured for capability {capability!r}")
        return model


@dataclass(frozen=True, slots=True)
class GenerationParams:
    """Decoding controls passed opaquely to the generation backend."""

    num_candidates: int
    temperature: float
    max_tokens: int = 40
    diversity_penalty: float = 0.5
    beam_groups: int = 1

    def __post_init__(self) -> None:
        if self.num_candidates < 1:
            raise ValueError(f"num_candidates must be >= 1, got {self.num_candidates}")
        if self.max_tokens < 1:
            raise ValueError(f"max_tokens must be >= 1, got {self.max_tokens}")
        if self.temperature < 0:
            raise ValueError(f"temperature must be >= 0, got {self.temperature}")
        if self.beam_groups < 1:
            raise ValueError(f"beam_groups must be >= 1, got {self.beam_groups}")
        if self.diversity_penalty < 0:
            raise ValueError(f"diversity_penalty must be >= 0, got {self.diversity_penalty}")
