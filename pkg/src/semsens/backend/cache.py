"""Append-only persistent cache of raw backend responses.

Keys are (capability, model id, digest of canonicalized inputs), where
canonicalization is Unicode NFC + trim + internal-whitespace collapse, so
cosmetic whitespace variants share one entry.  Values are raw wire
responses, not parsed types; parsing fixes therefore never invalidate the
cache.  Entries carry a checksum, and corrupt lines are skipped with a
warning rather than poisoning a run.
"""

from __future__ import annotations

import hashlib
import json
import logging
import threading
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Any

from semsens.core import nfc, normalize_whitespace

logger = logging.getLogger(__name__)


def canonical_text(text: str) -> str:
    """Cache-key canonicalization: NFC, trim, collapse internal whitespace."""
    return normalize_whitespace(nfc(text))


def canonical_json(obj: Any) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), ensure_ascii=False)


def digest_inputs(obj: Any) -> str:
    """Stable hex digest of a canonical-JSON rendering of the inputs."""
    return hashlib.sha256(canonical_json(obj).encode("utf-8")).hexdigest()


def _response_checksum(response: Any) -> str:
    return hashlib.sha256(canonical_json(response).encode("utf-8")).hexdigest()


@dataclass(frozen=True, slots=True)
class CacheKey:
    capability: str
    model: str
    digest: str


class ResponseCache:
    """In-memory map backed by an append-only JSONL journal.

    Safe for concurrent readers; appends are serialized.  ``path=None``
    keeps the cache purely in memory (one-run dedup only).
    """

    def __init__(self, path: str | Path | None = None):
        self._path = Path(path) if path is not None else None
        self._entries: dict[CacheKey, Any] = {}
        self._lock = threading.Lock()
        self.hits = 0
        self.misses = 0
        if self._path is not None and self._path.exists():
            self._load()

    def _load(self) -> None:
        assert self._path is not None
        with self._path.open("r", encoding="utf-8") as handle:
            for lineno, line in enumerate(handle, start=1):
                line = line.strip()
                if not line:
                    continue
                try:
                    entry = json.loads(line)
                    key = CacheKey(entry["capability"], entry["model"], entry["digest"])
                    response = entry["response"]
                    if _response_checksum(response) != entry["checksum"]:
                        raise ValueError("checksum mismatch")
                except (ValueError, KeyError, TypeError) as exc:
                    logger.warning(
                        "ignoring corrupt cache entry at %s:%d (%s); it will be recomputed",
                        self._path, lineno, exc,
                    )
                    continue
                self._entries.setdefault(key, response)

    def __len__(self) -> int:
        return len(self._entries)

    def get(self, key: CacheKey) -> Any | None:
        value = self._entries.get(key)
        if value is None:
            self.misses += 1
        else:
            self.hits += 1
        return value

    def put(self, key: CacheKey, response: Any) -> None:
        with self._lock:
            if key in self._entries:
                return
            self._entries[key] = response
            if self._path is None:
                return
            entry = {
                "capability": key.capability,
                "model": key.model,
                "digest": key.digest,
                "created_at": time.time(),
                "checksum": _response_checksum(response),
                "response": response,
            }
            line = json.dumps(entry, sort_keys=True, separators=(",", ":"), ensure_ascii=False)
            with self._path.open("a", encoding="utf-8") as handle:
                handle.write(line + "\n")
