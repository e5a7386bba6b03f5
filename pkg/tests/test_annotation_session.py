"""Scripted two-annotator session against the real annotation service:
100 fixture tasks judged over HTTP, a mid-session reconnect, and an export
that must reproduce the core agreement computation exactly."""

import json
from urllib.request import Request, urlopen

import pytest

from semsens.annotation import (
    AnnotationTask,
    JudgmentJournal,
    agreement_report,
    cohens_kappa,
    export_judgments,
)
from semsens.annotation.service import AnnotationService, make_server, serve_forever_in_thread

N_TASKS = 100

# ann1 rejects tasks 0-4, ann2 rejects 2-8: 91 both-yes, 3 both-no,
# 6 disagreements -> p_o = 0.94, p_e = 0.95*0.93 + 0.05*0.07 = 0.887.
def _ann1_verdict(i: int) -> bool:
    return i >= 5


def _ann2_verdict(i: int) -> bool:
    return i < 2 or i > 8


def _get(url):
    with urlopen(Request(url)) as response:
        return json.loads(response.read().decode())


def _post(url, payload):
    request = Request(
        url, data=json.dumps(payload).encode(), headers={"Content-Type": "application/json"}
    )
    with urlopen(request) as response:
        return json.loads(response.read().decode())


@pytest.fixture()
def live_service(tmp_path):
    tasks = [
        AnnotationTask(
            task_id=f"alpha:r{i}:1",
            dataset_id="alpha",
            record_id=f"r{i}",
            candidate_index=1,
            hypothesis=f"Original hypothesis sentence number {i}.",
            variant=f"Rewritten hypothesis sentence number {i}.",
        )
        for i in range(N_TASKS)
    ]
    journal_path = tmp_path / "judgments.jsonl"
    service = AnnotationService(tasks, JudgmentJournal(journal_path))
    server = make_server(service)
    serve_forever_in_thread(server)
    host, port = server.server_address[:2]
    yield f"http://{host}:{port}", journal_path
    server.shutdown()
    server.server_close()


def _judge_all(url, annotator, verdict, stop_after=None):
    tasks = _get(f"{url}/api/tasks?annotator={annotator}")["tasks"]
    judged = 0
    for task in tasks:
        if task["judged"]:
            continue
        index = int(task["task_id"].split(":")[1][1:])
        _post(
            f"{url}/api/judgments",
            {"task_id": task["task_id"], "annotator": annotator, "equivalent": verdict(index)},
        )
        judged += 1
        if stop_after is not None and judged >= stop_after:
            break
    return judged


def test_full_session_with_refresh_and_exact_kappa(live_service):
    url, journal_path = live_service

    # ann1 judges 40 tasks, then "refreshes": the second pass re-fetches
    # the task list and must see exactly 40 already judged.
    assert _judge_all(url, "ann1", _ann1_verdict, stop_after=40) == 40
    refreshed = _get(f"{url}/api/tasks?annotator=ann1")["tasks"]
    assert sum(task["judged"] for task in refreshed) == 40
    assert _judge_all(url, "ann1", _ann1_verdict) == N_TASKS - 40

    assert _judge_all(url, "ann2", _ann2_verdict) == N_TASKS

    agreement = _get(f"{url}/api/agreement")
    assert agreement["n"] == N_TASKS
    assert agreement["percent_agreement"] == pytest.approx(94.0)

    # The journal on disk reproduces the served numbers exactly.
    journal = JudgmentJournal(journal_path)
    live = journal.live_judgments()
    assert len(live) == 2 * N_TASKS
    a = [live[(f"alpha:r{i}:1", "ann1")].equivalent for i in range(N_TASKS)]
    b = [live[(f"alpha:r{i}:1", "ann2")].equivalent for i in range(N_TASKS)]
    expected_kappa = cohens_kappa(a, b)
    assert agreement["kappa"] == pytest.approx(expected_kappa, abs=0)  # exact
    assert expected_kappa == pytest.approx((0.94 - 0.887) / (1 - 0.887), abs=1e-12)

    report = agreement_report(live)
    assert report.kappa == agreement["kappa"]

    # Every judgment visible over the API is present in the export.
    export_lines = export_judgments(live).strip().splitlines()
    assert len(export_lines) == 1 + 2 * N_TASKS


def test_no_judgment_lost_across_service_restart(live_service, tmp_path):
    url, journal_path = live_service
    assert _judge_all(url, "ann1", _ann1_verdict, stop_after=25) == 25

    # Simulate a crash/restart: a fresh service folds the same journal.
    tasks = [
        AnnotationTask(
            task_id=f"alpha:r{i}:1",
            dataset_id="alpha",
            record_id=f"r{i}",
            candidate_index=1,
            hypothesis=f"Original hypothesis sentence number {i}.",
            variant=f"Rewritten hypothesis sentence number {i}.",
        )
        for i in range(N_TASKS)
    ]
    reloaded = AnnotationService(tasks, JudgmentJournal(journal_path))
    assert len(reloaded.journal.judged_tasks("ann1")) == 25
