"""HTTP service backing the annotation UI.

    GET  /api/tasks?annotator=ID -> {"tasks": [{"task_id", "h", "h_prime", "judged"}]}
    POST /api/judgments {"task_id", "annotator", "equivalent"} -> {"ok": true}
    GET  /api/agreement -> {"percent_agreement", "kappa", "n"}

Static UI assets are served from an optional directory; the API holds no
client-side-only state, so a browser refresh just re-projects the journal.
"""

from __future__ import annotations

import json
import logging
import mimetypes
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from pathlib import Path
from typing import Sequence
from urllib.parse import parse_qs, urlparse

from semsens.annotation import (
    AnnotationError,
    AnnotationTask,
    JudgmentJournal,
    agreement_report,
)

logger = logging.getLogger(__name__)


class AnnotationService:
    """Task list + journal + agreement, shared across request threads."""

    def __init__(
        self,
        tasks: Sequence[AnnotationTask],
        journal: JudgmentJournal,
        static_dir: str | Path | None = None,
    ):
        self.tasks = list(tasks)
        self._by_id = {task.task_id: task for task in self.tasks}
        if len(self._by_id) != len(self.tasks):
            raise ValueError("duplicate task ids in annotation task list")
        self.journal = journal
        self.static_dir = Path(static_dir) if static_dir else None

    def task_view(self, annotator_id: str) -> list[dict]:
        judged = self.journal.judged_tasks(annotator_id)
        return [
            {
                "task_id": task.task_id,
                "h": task.hypothesis,
                "h_prime": task.variant,
                "judged": task.task_id in judged,
            }
            for task in self.tasks
        ]

    def submit(self, task_id: str, annotator_id: str, equivalent: bool) -> None:
        if task_id not in self._by_id:
            raise KeyError(task_id)
        self.journal.record(task_id, annotator_id, equivalent)

    def agreement_view(self) -> dict:
        try:
            report = agreement_report(self.journal.live_judgments())
        except AnnotationError:
            return {"percent_agreement": None, "kappa": None, "n": 0}
        return report.to_payload()


class _Handler(BaseHTTPRequestHandler):
    service: AnnotationService  # assigned by make_server

    def log_message(self, fmt: str, *args) -> None:
        logger.debug("annotation-http: " + fmt, *args)

    def _send_json(self, payload: dict, status: int = 200) -> None:
        body = json.dumps(payload, ensure_ascii=False).encode("utf-8")
        self.send_response(status)
        self.send_header("Content-Type", "application/json; charset=utf-8")
        self.send_header("Content-Length", str(len(body)))
        self.end_headers()
        self.wfile.write(body)

    def _send_error_json(self, status: int, message: str) -> None:
        self._send_json({"error": message}, status=status)

    def do_GET(self) -> None:  # noqa: N802 (http.server API)
        parsed = urlparse(self.path)
        if parsed.path == "/api/tasks":
            params = parse_qs(parsed.query)
            annotator = (params.get("annotator") or [""])[0].strip()
            if not annotator:
                self._send_error_json(400, "missing annotator parameter")
                return
            self._send_json({"tasks": self.service.task_view(annotator)})
            return
        if parsed.path == "/api/agreement":
            self._send_json(self.service.agreement_view())
            return
        self._serve_static(parsed.path)

    def do_POST(self) -> None:  # noqa: N802
        parsed = urlparse(self.path)
        if parsed.path != "/api/judgments":
            self._send_error_json(404, f"unknown endpoint: {parsed.path}")
            return
        length = int(self.headers.get("Content-Length") or 0)
        try:
            body = json.loads(self.rfile.read(length).decode("utf-8"))
        except (ValueError, UnicodeDecodeError):
            self._send_error_json(400, "body must be a JSON object")
            return
        if not isinstance(body, dict):
            self._send_error_json(400, "body must be a JSON object")
            return
        task_id = body.get("task_id")
        annotator = body.get("annotator")
        equivalent = body.get("equivalent")
        if not isinstance(task_id, str) or not isinstance(annotator, str) or not annotator.strip():
            self._send_error_json(400, "task_id and annotator must be non-empty strings")
            return
        if not isinstance(equivalent, bool):
            self._send_error_json(400, "equivalent must be a boolean")
            return
        try:
            self.service.submit(task_id, annotator.strip(), equivalent)
        except KeyError:
            self._send_error_json(404, f"unknown task_id: {task_id}")
            return
        self._send_json({"ok": True})

    def _serve_static(self, path: str) -> None:
        root = self.service.static_dir
        if root is None:
            self._send_error_json(404, "no static assets configured")
            return
        relative = path.lstrip("/") or "index.html"
        target = (root / relative).resolve()
        if not str(target).startswith(str(root.resolve())) or not target.is_file():
            self._send_error_json(404, f"not found: {path}")
            return
        content_type = mimetypes.guess_type(target.name)[0] or "application/octet-stream"
        body = target.read_bytes()
        self.send_response(200)
        self.send_header("Content-Type", content_type)
        self.send_header("Content-Length", str(len(body)))
        self.end_headers()
        self.wfile.write(body)


def make_server(
    service: AnnotationService,
    host: str = "127.0.0.1",
    port: int = 0,
) -> ThreadingHTTPServer:
    """Build (but do not start) the threaded HTTP server."""
    handler = type("BoundHandler", (_Handler,), {"service": service})
    return ThreadingHTTPServer((host, port), handler)


def serve_forever_in_thread(server: ThreadingHTTPServer) -> threading.Thread:
    thread = threading.Thread(target=server.serve_forever, name="annotation-http", daemon=True)
    thread.start()
    return thread
