"""Wire-protocol conformance checks, runnable against any server.

Used against the in-repo stub server in this package's test suite and
against external protocol implementations (e.g. a model-serving shim).
Returns human-readable failure strings; an empty list means conformant.
"""

from __future__ import annotations

import math
from typing import Any

import requests

from semsens.backend.client import PROMPT_TEMPLATE
from semsens.backend.transport import WIRE_PATHS
from semsens.core import PROB_SUM_TOL

_PROBE_PREMISE = "A man naps on a wooden bench in the park."
_PROBE_HYPOTHESIS = "Someone is resting outdoors."
_PROBE_TEXT_ALT = "The committee approved the budget."


def run_conformance(
    base_url: str,
    models: dict[str, str],
    timeout: float = 15.0,
    session: requests.Session | None = None,
) -> list[str]:
    """Exercise all three endpoints plus error shapes; collect failures."""
    http = session or requests.Session()
    base = base_url.rstrip("/")
    failures: list[str] = []

    def post(capability: str, payload: dict[str, Any]) -> requests.Response:
        return http.post(base + WIRE_PATHS[capability], json=payload, timeout=timeout)

    # --- /v1/nli ----------------------------------------------------------
    response = post(
        "nli",
        {"premise": _PROBE_PREMISE, "hypothesis": _PROBE_HYPOTHESIS, "model": models["nli"]},
    )
    if not response.ok:
        failures.append(f"nli: expected 2xx, got {response.status_code}")
    else:
        body = _json_or_none(response)
        if not isinstance(body, dict) or set(body) != {"probs"}:
            failures.append(f"nli: body must be exactly {{'probs': ...}}, got {body!r}")
        else:
            probs = body["probs"]
            expected_keys = {"entailment", "neutral", "contradiction"}
            if not isinstance(probs, dict) or set(probs) != expected_keys:
                failures.append(f"nli: probs keys must be {sorted(expected_keys)}, got {probs!r}")
            elif not all(_is_number(probs[k]) for k in expected_keys):
                failures.append(f"nli: probs values must be numeric, got {probs!r}")
            else:
                if any(probs[k] < 0 for k in expected_keys):
                    failures.append(f"nli: negative probability in {probs!r}")
                total = math.fsum(float(probs[k]) for k in expected_keys)
                if abs(total - 1.0) > PROB_SUM_TOL:
                    failures.append(f"nli: probabilities sum to {total!r}, expected 1 +/- {PROB_SUM_TOL}")

    failures.extend(
        _check_error_shape(
            post("nli", {"premise": _PROBE_PREMISE, "model": models["nli"]}), "nli missing field"
        )
    )

    # --- /v1/generate -----------------------------------------------------
    n = 3
    response = post(
        "generate",
        {
            "prompt": PROMPT_TEMPLATE.format(hypothesis=_PROBE_HYPOTHESIS),
            "n": n,
            "temperature": 0.4,
            "max_tokens": 40,
            "diversity_penalty": 0.5,
            "beam_groups": 3,
            "model": models["generate"],
        },
    )
    if not response.ok:
        failures.append(f"generate: expected 2xx, got {response.status_code}")
    else:
        body = _json_or_none(response)
        if not isinstance(body, dict) or set(body) != {"candidates"}:
            failures.append(f"generate: body must be exactly {{'candidates': ...}}, got {body!r}")
        else:
            candidates = body["candidates"]
            if not isinstance(candidates, list) or not candidates:
                failures.append(f"generate: candidates must be a non-empty list, got {candidates!r}")
            elif not all(isinstance(c, str) and c.strip() for c in candidates):
                failures.append(f"generate: candidates must be non-empty strings, got {candidates!r}")
            elif len(candidates) > n:
                failures.append(f"generate: returned {len(candidates)} candidates for n={n}")

    failures.extend(
        _check_error_shape(
            post("generate", {"n": 3, "model": models["generate"]}), "generate missing field"
        )
    )

    # --- /v1/embed --------------------------------------------------------
    vectors = []
    for text in (_PROBE_HYPOTHESIS, _PROBE_TEXT_ALT):
        response = post("embed", {"text": text, "model": models["embed"]})
        if not response.ok:
            failures.append(f"embed: expected 2xx, got {response.status_code}")
            continue
        body = _json_or_none(response)
        if not isinstance(body, dict) or set(body) != {"vector"}:
            failures.append(f"embed: body must be exactly {{'vector': ...}}, got {body!r}")
            continue
        vector = body["vector"]
        if not isinstance(vector, list) or not vector or not all(_is_number(v) for v in vector):
            failures.append(f"embed: vector must be a non-empty numeric list, got {vector!r}")
            continue
        vectors.append(vector)
    if len(vectors) == 2 and len(vectors[0]) != len(vectors[1]):
        failures.append(
            f"embed: dimension varies across calls ({len(vectors[0])} vs {len(vectors[1])})"
        )

    failures.extend(
        _check_error_shape(post("embed", {"model": models["embed"]}), "embed missing field")
    )

    return failures


def _json_or_none(response: requests.Response) -> Any:
    try:
        return response.json()
    except ValueError:
        return None


def _is_number(value: Any) -> bool:
    return isinstance(value, (int, float)) and not isinstance(value, bool)


def _check_error_shape(response: requests.Response, context: str) -> list[str]:
    if response.ok:
        return [f"{context}: expected a non-2xx status, got {response.status_code}"]
    body = _json_or_none(response)
    if not isinstance(body, dict) or not isinstance(body.get("error"), str):
        return [f"{context}: error body must be {{'error': str}}, got {body!r}"]
    return []
