"""Uniform access to NLI classification, paraphrase generation, and
sentence embedding over a JSON-over-HTTP wire protocol, with deterministic
mocks and a persistent response cache."""

from semsens.backend.cache import CacheKey, ResponseCache, canonical_text, digest_inputs
from semsens.backend.client import PROMPT_TEMPLATE, InferenceClient, parse_nli_response
from semsens.backend.config import CAPABILITIES, BackendConfig, GenerationParams
from semsens.backend.conformance import run_conformance
from semsens.backend.transport import (
    BackendError,
    BackendRequestError,
    EmptyGenerationError,
    HttpTransport,
    MalformedResponseError,
    Transport,
    TransportError,
    WIRE_PATHS,
)

__all__ = [
    "BackendConfig",
    "BackendError",
    "BackendRequestError",
    "CacheKey",
    "CAPABILITIES",
    "EmptyGenerationError",
    "GenerationParams",
    "HttpTransport",
    "InferenceClient",
    "MalformedResponseError",
    "PROMPT_TEMPLATE",
    "ResponseCache",
    "Transport",
    "TransportError",
    "WIRE_PATHS",
    "canonical_text",
    "digest_inputs",
    "parse_nli_response",
    "run_conformance",
]
