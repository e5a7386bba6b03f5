"""Command-line entry point: composable pipeline stages over one config.

Every flag has an environment mirror prefixed SEMSENS_ (e.g.
``--max-inflight`` / ``SEMSENS_MAX_INFLIGHT``; per-capability backend URLs
via ``SEMSENS_BACKEND_URL_NLI`` etc.).  Exit codes: 0 success, 1 usage
error, 2 stage failure, 3 consistency violation.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import time
from pathlib import Path
from typing import Any, Sequence

import requests

from semsens import fixtures, pipeline, stagefiles
from semsens.annotation import (
    AnnotationError,
    AnnotationTask,
    JudgmentJournal,
    agreement_report,
    export_judgments,
    sample_for_annotation,
)
from semsens.annotation.service import AnnotationService, make_server
from semsens.backend import HttpTransport, InferenceClient, ResponseCache
from semsens.core import NLIRecord
from semsens.ingest import DatasetLoadError
from semsens.pipeline import ConfigError, RunConfig, StageError
from semsens.report import ConsistencyError
from semsens.variation import VariationSet

ENV_PREFIX = "SEMSENS_"

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_STAGE = 2
EXIT_CONSISTENCY = 3

ANNOTATION_TASKS = "annotation_tasks.jsonl"
ANNOTATION_JOURNAL = "judgments.jsonl"


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message: str):  # noqa: D102 (argparse API)
        raise UsageError(message)


def _env(name: str) -> str | None:
    return os.environ.get(ENV_PREFIX + name)


def build_parser() -> _Parser:
    parser = _Parser(prog="semsens", description=__doc__)
    parser.add_argument("--config", default=_env("CONFIG"), help="run configuration JSON")
    parser.add_argument("--out", default=_env("OUT"), help="run directory for stage artifacts")
    parser.add_argument("--seed", type=int, default=_env("SEED"), help="override the config seed")
    parser.add_argument(
        "--max-inflight",
        type=int,
        default=_env("MAX_INFLIGHT"),
        help="override the backend in-flight request limit",
    )
    parser.add_argument(
        "--backend-url",
        action="append",
        default=None,
        metavar="CAPABILITY=URL",
        help="override a capability endpoint (repeatable)",
    )
    parser.add_argument(
        "--dry-run",
        action="store_true",
        help="validate config and backend reachability, then stop",
    )

    sub = parser.add_subparsers(dest="command", required=True)
    run = sub.add_parser("run", help="run the full pipeline (or one stage)")
    run.add_argument("--stage", choices=pipeline.STAGE_ORDER, help="run only this stage")
    for stage in pipeline.STAGE_ORDER:
        sub.add_parser(stage, help=f"run the {stage} stage")

    annotate = sub.add_parser("annotate", help="human-evaluation workflow")
    annotate_sub = annotate.add_subparsers(dest="annotate_command", required=True)
    serve = annotate_sub.add_parser("serve", help="serve the annotation API and UI")
    serve.add_argument("--n", type=int, default=100, help="tasks to sample when none exist yet")
    serve.add_argument("--host", default="127.0.0.1")
    serve.add_argument("--port", type=int, default=8765)
    serve.add_argument("--ui", default=_env("UI"), help="directory of built UI assets")
    annotate_sub.add_parser("export", help="export all judgments as a delimited table")
    annotate_sub.add_parser("kappa", help="print percent agreement and Cohen's kappa")

    selftest = sub.add_parser(
        "selftest", help="run the mock-backend fixture end to end and compare to the golden report"
    )
    selftest.add_argument(
        "--update-golden",
        action="store_true",
        help=argparse.SUPPRESS,  # regenerates the pinned golden artifacts in a source checkout
    )
    return parser


def _parse_backend_urls(values: Sequence[str] | None) -> dict[str, str]:
    endpoints: dict[str, str] = {}
    for capability in ("nli", "generate", "embed"):
        env_value = _env("BACKEND_URL_" + capability.upper())
        if env_value:
            endpoints[capability] = env_value
    for value in values or ():
        if "=" not in value:
            raise UsageError(f"--backend-url expects CAPABILITY=URL, got {value!r}")
        capability, url = value.split("=", 1)
        endpoints[capability.strip()] = url.strip()
    return endpoints


def _load_config(args: argparse.Namespace) -> RunConfig:
    if not args.config:
        raise UsageError("--config is required (or set SEMSENS_CONFIG)")
    overrides: dict[str, Any] = {"endpoints": _parse_backend_urls(args.backend_url)}
    if args.seed is not None:
        overrides["seed"] = int(args.seed)
    if args.max_inflight is not None:
        overrides["max_inflight"] = int(args.max_inflight)
    return pipeline.load_config(args.config, overrides=overrides)


def _out_dir(args: argparse.Namespace) -> Path:
    if not args.out:
        raise UsageError("--out is required (or set SEMSENS_OUT)")
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _cache_path(config: RunConfig, out: Path) -> Path | None:
    raw = config.backend.cache_path
    if raw is None:
        return None
    path = Path(raw)
    return path if path.is_absolute() else out / path


def _build_client(config: RunConfig, out: Path, transport=None) -> InferenceClient:
    cache = ResponseCache(_cache_path(config, out))
    transport = transport or HttpTransport(config.backend)
    return InferenceClient(config.backend, transport, cache=cache)


def _check_reachable(config: RunConfig) -> list[str]:
    failures = []
    for capability, base in sorted(config.backend.endpoints.items()):
        try:
            requests.get(base, timeout=min(config.backend.timeout, 5.0))
        except requests.RequestException as exc:
            failures.append(f"{capability}: {base} unreachable ({exc.__class__.__name__})")
    return failures


def _run_stages(
    config: RunConfig,
    out: Path,
    stages: Sequence[str],
    transport=None,
) -> InferenceClient:
    client = _build_client(config, out, transport=transport)
    started = time.time()
    completed: list[str] = []
    try:
        for stage in stages:
            if stage == "ingest":
                pipeline.stage_ingest(config, out)
            elif stage == "filter":
                pipeline.stage_filter(config, out, client)
            elif stage == "generate":
                pipeline.stage_generate(config, out, client)
            elif stage == "evaluate":
                pipeline.stage_evaluate(config, out, client)
            elif stage == "analyze":
                pipeline.stage_analyze(config, out, client)
            elif stage == "report":
                pipeline.stage_report(config, out, cache_entries=len(client.cache))
            else:
                raise UsageError(f"unknown stage: {stage}")
            completed.append(stage)
    except BaseException as exc:
        # Mark the run incomplete; stage files are written atomically, so
        # anything present is whole, and anything absent never started.
        _write_run_log(out, client, started, completed, failed=repr(exc))
        raise
    _write_run_log(out, client, started, completed, failed=None)
    return client


def _write_run_log(out, client, started, completed, failed):
    stagefiles.write_json(
        out / stagefiles.RUN_LOG,
        {
            "status": "incomplete" if failed else "complete",
            "failed": failed,
            "stages_completed": list(completed),
            "wall_seconds": time.time() - started,
            "cache": {
                "hits": client.cache.hits,
                "misses": client.cache.misses,
                "entries": len(client.cache),
            },
        },
    )


# ---------------------------------------------------------------------------
# annotate
# ---------------------------------------------------------------------------


def _load_annotation_tasks(out: Path, config: RunConfig, n: int) -> list[AnnotationTask]:
    tasks_path = out / ANNOTATION_TASKS
    if tasks_path.exists():
        return [AnnotationTask.from_payload(row) for row in stagefiles.read_jsonl(tasks_path)]
    records = {
        record.record_id: record
        for record in (
            NLIRecord.from_payload(row) for row in stagefiles.read_jsonl(out / stagefiles.RECORDS)
        )
    }
    sets = [
        VariationSet.from_payload(row)
        for row in stagefiles.read_jsonl(out / stagefiles.VARIATIONS)
    ]
    tasks = sample_for_annotation(sets, records, n=n, seed=config.seed)
    stagefiles.write_jsonl(tasks_path, (task.to_payload() for task in tasks))
    return tasks


def _cmd_annotate(args: argparse.Namespace) -> int:
    out = _out_dir(args)
    if args.annotate_command == "serve":
        config = _load_config(args)
        tasks = _load_annotation_tasks(out, config, args.n)
        journal = JudgmentJournal(out / ANNOTATION_JOURNAL)
        static_dir = Path(args.ui) if args.ui else None
        service = AnnotationService(tasks, journal, static_dir=static_dir)
        server = make_server(service, host=args.host, port=args.port)
        host, port = server.server_address[:2]
        print(f"annotation service on http://{host}:{port} with {len(tasks)} tasks")
        try:
            server.serve_forever()
        except KeyboardInterrupt:
            pass
        finally:
            server.server_close()
        return EXIT_OK
    journal = JudgmentJournal(out / ANNOTATION_JOURNAL)
    if args.annotate_command == "export":
        sys.stdout.write(export_judgments(journal.live_judgments()))
        return EXIT_OK
    if args.annotate_command == "kappa":
        report = agreement_report(journal.live_judgments())
        print(json.dumps(report.to_payload(), sort_keys=True))
        return EXIT_OK
    raise UsageError(f"unknown annotate command: {args.annotate_command}")


# ---------------------------------------------------------------------------
# selftest
# ---------------------------------------------------------------------------

GOLDEN_FILES = (stagefiles.REPORT_JSON, stagefiles.REPORT_MD, stagefiles.RATES_CSV)


def _golden_dir() -> Path:
    return Path(__file__).parent / "golden"


def run_selftest(out: Path, update_golden: bool = False) -> int:
    """Full fixture pipeline against scripted mocks, then a byte compare."""
    config_path = fixtures.write_fixture_tree(out)
    config = pipeline.load_config(config_path)
    _run_stages(config, out, pipeline.STAGE_ORDER, transport=fixtures.build_transport())

    golden = _golden_dir()
    if update_golden:
        golden.mkdir(parents=True, exist_ok=True)
        for name in GOLDEN_FILES:
            golden.joinpath(name).write_bytes((out / name).read_bytes())
        print(f"golden artifacts refreshed in {golden}")
        return EXIT_OK

    status = EXIT_OK
    for name in GOLDEN_FILES:
        expected_path = golden / name
        if not expected_path.exists():
            print(f"[FAIL] {name}: no golden file at {expected_path}")
            status = EXIT_STAGE
            continue
        actual = (out / name).read_bytes()
        expected = expected_path.read_bytes()
        if actual == expected:
            print(f"[PASS] {name}: byte-identical to golden")
        else:
            print(f"[FAIL] {name}: differs from golden ({len(actual)} vs {len(expected)} bytes)")
            status = EXIT_STAGE
    return status


# ---------------------------------------------------------------------------
# main
# ---------------------------------------------------------------------------


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command == "selftest":
            return run_selftest(_out_dir(args), update_golden=args.update_golden)
        if args.command == "annotate":
            return _cmd_annotate(args)

        config = _load_config(args)
        out = _out_dir(args)
        if args.dry_run:
            failures = _check_reachable(config)
            payload = {
                "config_digest": config.digest,
                "datasets": [m.dataset_id for m in config.manifests],
                "reachable": not failures,
                "failures": failures,
            }
            print(json.dumps(payload, sort_keys=True))
            return EXIT_OK if not failures else EXIT_STAGE

        if args.command == "run":
            stages = [args.stage] if args.stage else list(pipeline.STAGE_ORDER)
        else:
            stages = [args.command]
        _run_stages(config, out, stages)
        return EXIT_OK
    except UsageError as exc:
        print(json.dumps({"error": str(exc), "kind": "usage"}), file=sys.stderr)
        return EXIT_USAGE
    except ConfigError as exc:
        print(json.dumps({"error": str(exc), "kind": "config"}), file=sys.stderr)
        return EXIT_USAGE
    except ConsistencyError as exc:
        print(json.dumps({"error": str(exc), "kind": "consistency"}), file=sys.stderr)
        return EXIT_CONSISTENCY
    except (StageError, DatasetLoadError, AnnotationError, stagefiles.MissingStageOutputError) as exc:
        print(json.dumps({"error": str(exc), "kind": "stage"}), file=sys.stderr)
        return EXIT_STAGE
    except Exception as exc:  # backend/transport failures and the like
        print(json.dumps({"error": str(exc), "kind": exc.__class__.__name__}), file=sys.stderr)
        return EXIT_STAGE


if __name__ == "__main__":
    sys.exit(main())
