"""Wire transport for the JSON-over-HTTP inference protocol.

Endpoints (all POST, UTF-8 JSON bodies):

    /v1/nli       {"premise": str, "hypothesis": str, "model": str}
                  -> {"probs": {"entailment": f, "neutral": f, "contradiction": f}}
    /v1/generate  {"prompt": str, "n": int, "temperature": f, "max_tokens": int,
                   "diversity_penalty": f, "beam_groups": int, "model": str}
                  -> {"candidates": [str, ...]}
    /v1/embed     {"text": str, "model": str}
                  -> {"vector": [f, ...]}

Errors are non-2xx responses with {"error": str}.  Transient failures
(network errors, 5xx) are retried with exponential backoff and jitter
within a per-request budget; 4xx responses are not retried.
"""

from __future__ import annotations

import random
import time
from typing import Any, Protocol

import requests

from semsens.backend.config import BackendConfig

WIRE_PATHS = {
    "nli": "/v1/nli",
    "generate": "/v1/generate",
    "embed": "/v1/embed",
}


class BackendError(Exception):
    """Base class for backend access failures."""


class TransportError(BackendError):
    """Network-level failure that survived the retry budget."""


class BackendRequestError(BackendError):
    """Non-2xx response from the backend."""

    def __init__(self, status: int, message: str):
        super().__init__(f"backend returned {status}: {message}")
        self.status = status
        self.message = message


class MalformedResponseError(BackendError):
    """Response violated the wire schema or a distribution invariant."""


class EmptyGenerationError(BackendError):
    """Generation backend produced no usable candidates (retryable)."""


class Transport(Protocol):
    """Anything that can execute one wire-protocol call."""

    def post(self, capability: str, payload: dict[str, Any]) -> Any: ...


class HttpTransport:
    """requests-based transport with retry/backoff on transient failures."""

    def __init__(self, config: BackendConfig, session: requests.Session | None = None):
        self._config = config
        self._session = session or requests.Session()

    def _url(self, capability: str) -> str:
        base = self._config.endpoints.get(capability)
        if not base:
            raise ValueError(f"no endpoint configured for capability {capability!r}")
        return base.rstrip("/") + WIRE_PATHS[capability]

    def post(self, capability: str, payload: dict[str, Any]) -> Any:
        url = self._url(capability)
        attempts = self._config.retries + 1
        last_error: Exception | None = None
        for attempt in range(attempts):
            if attempt:
                delay = self._config.retry_backoff * (2 ** (attempt - 1))
                time.sleep(delay * (0.5 + random.random()))
            try:
                response = self._session.post(url, json=payload, timeout=self._config.timeout)
            except requests.RequestException as exc:
                last_error = exc
                continue
            if response.status_code >= 500:
                last_error = BackendRequestError(response.status_code, _error_message(response))
                continue
            if response.status_code >= 400:
                raise BackendRequestError(response.status_code, _error_message(response))
            try:
                return response.json()
            except ValueError as exc:
                raise MalformedResponseError(f"non-JSON response from {url}") from exc
        raise TransportError(
            f"{capability} request to {url} failed after {attempts} attempts: {last_error}"
        )

    def close(self) -> None:
        self._session.close()


def _error_message(response: requests.Response) -> str:
    try:
        body = response.json()
        if isinstance(body, dict) and isinstance(body.get("error"), str):
            return body["error"]
    except ValueError:
        pass
    return response.text[:200]
