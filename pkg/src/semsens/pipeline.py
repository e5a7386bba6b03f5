"""Run configuration and the file-to-file stage implementations.

Stages communicate exclusively through files in the run directory (see
``stagefiles``), so any stage can be re-run from its predecessors'
artifacts, and a warm response cache makes a full re-run free of backend
calls and byte-identical.
"""

from __future__ import annotations

import hashlib
import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Mapping

from semsens import analysis, metrics, report as report_mod, stagefiles
from semsens.backend import BackendConfig, GenerationParams, InferenceClient
from semsens.core import NLIRecord, Prediction
from semsens.ingest import DatasetManifest, load_dataset, select_subset
from semsens.metrics import EvaluationPair
from semsens.variation import (
    DEFAULT_ROUND_BUDGET,
    VariationSet,
    acquire_variations,
    filter_correct,
    temperature_for_round,
)


class ConfigError(ValueError):
    """The run configuration is unusable."""


@dataclass(frozen=True, slots=True)
class GenerationSettings:
    """Decoding defaults; the temperature is re-sampled per record/round
    inside the configured range so refinement rounds explore fresh
    decoding randomness while staying reproducible for a fixed seed."""

    num_candidates: int = 8
    temperature_range: tuple[float, float] = (0.3, 0.6)
    max_tokens: int = 40
    diversity_penalty: float = 0.5
    beam_groups: int = 4

    def __post_init__(self) -> None:
        lo, hi = self.temperature_range
        if not (0 <= lo <= hi):
            raise ConfigError(f"invalid temperature range: {self.temperature_range}")
        if self.num_candidates < 1:
            raise ConfigError("generation.num_candidates must be >= 1")


@dataclass(frozen=True, slots=True)
class RunConfig:
    """Validated run configuration.

    Seeds are mandatory: reproducibility must not hinge on wall-clock
    defaults.  The config digest covers only semantic fields (not output
    or cache locations), so re-running the same experiment in a different
    directory reports the same digest.
    """

    seed: int
    manifests: tuple[DatasetManifest, ...]
    backend: BackendConfig
    generation: GenerationSettings = field(default_factory=GenerationSettings)
    k: int = 5
    refinement_budget: int = DEFAULT_ROUND_BUDGET
    subset_mode: str = "sample"
    workers: int = 4
    ks_mode: str = "discrete"
    digest: str = ""

    def __post_init__(self) -> None:
        if self.k < 1:
            raise ConfigError(f"k must be >= 1, got {self.k}")
        if self.refinement_budget < 1:
            raise ConfigError(f"refinement_budget must be >= 1, got {self.refinement_budget}")
        if self.subset_mode not in ("sample", "prefix"):
            raise ConfigError(f"unknown subset_mode: {self.subset_mode!r}")
        if self.workers < 1:
            raise ConfigError(f"workers must be >= 1, got {self.workers}")
        if self.ks_mode not in ("discrete", "samples"):
            raise ConfigError(f"unknown ks_mode: {self.ks_mode!r}")
        if not self.manifests:
            raise ConfigError("at least one dataset manifest is required")

    def params_for(self, record_id: str, round_number: int) -> GenerationParams:
        return GenerationParams(
            num_candidates=self.generation.num_candidates,
            temperature=temperature_for_round(
                self.seed, record_id, round_number, self.generation.temperature_range
            ),
            max_tokens=self.generation.max_tokens,
            diversity_penalty=self.generation.diversity_penalty,
            beam_groups=self.generation.beam_groups,
        )


# Keys that do not change the experiment and stay out of the digest.
_VOLATILE_CONFIG_KEYS = ("out_dir",)
_VOLATILE_BACKEND_KEYS = ("cache_path", "endpoints", "timeout", "max_inflight", "retries")


def config_digest(payload: Mapping[str, Any]) -> str:
    semantic = {k: v for k, v in payload.items() if k not in _VOLATILE_CONFIG_KEYS}
    backend = dict(semantic.get("backend", {}))
    for key in _VOLATILE_BACKEND_KEYS:
        backend.pop(key, None)
    semantic["backend"] = backend
    return hashlib.sha256(stagefiles.dumps_canonical(semantic).encode("utf-8")).hexdigest()


def load_config(path: str | Path, overrides: Mapping[str, Any] | None = None) -> RunConfig:
    """Parse and validate a JSON run configuration file.

    ``overrides`` may replace seed, max_inflight, and per-capability
    endpoint URLs (CLI flags and environment mirrors).
    """
    config_path = Path(path)
    try:
        payload = json.loads(config_path.read_text(encoding="utf-8"))
    except OSError as exc:
        raise ConfigError(f"cannot read config {config_path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {config_path} is not valid JSON: {exc.msg}") from exc
    return config_from_payload(payload, base_dir=config_path.parent, overrides=overrides)


def config_from_payload(
    payload: Mapping[str, Any],
    base_dir: Path,
    overrides: Mapping[str, Any] | None = None,
) -> RunConfig:
    overrides = dict(overrides or {})
    if "seed" not in payload and "seed" not in overrides:
        raise ConfigError("config must pin a seed; wall-clock defaults are not allowed")

    manifest_entries = payload.get("manifests") or []
    manifests = []
    for entry in manifest_entries:
        if isinstance(entry, str):
            manifest_path = base_dir / entry if not Path(entry).is_absolute() else Path(entry)
            try:
                entry = json.loads(manifest_path.read_text(encoding="utf-8"))
            except OSError as exc:
                raise ConfigError(f"cannot read manifest {manifest_path}: {exc}") from exc
            manifests.append(DatasetManifest.from_payload(entry, base_dir=manifest_path.parent))
        else:
            manifests.append(DatasetManifest.from_payload(entry, base_dir=base_dir))
    for manifest in manifests:
        if not Path(manifest.path).exists():
            raise ConfigError(f"dataset file not found: {manifest.path}")

    backend_payload = dict(payload.get("backend") or {})
    endpoints = dict(backend_payload.get("endpoints") or {})
    endpoints.update(overrides.get("endpoints") or {})
    try:
        backend = BackendConfig(
            endpoints=endpoints,
            models=dict(backend_payload.get("models") or {}),
            timeout=backend_payload.get("timeout", 30.0),
            max_inflight=int(
                overrides.get("max_inflight") or backend_payload.get("max_inflight", 4)
            ),
            retries=backend_payload.get("retries", 3),
            retry_backoff=backend_payload.get("retry_backoff", 0.5),
            cache_path=backend_payload.get("cache_path"),
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc

    generation_payload = dict(payload.get("generation") or {})
    if "temperature_range" in generation_payload:
        generation_payload["temperature_range"] = tuple(generation_payload["temperature_range"])
    generation = GenerationSettings(**generation_payload)

    return RunConfig(
        seed=int(overrides.get("seed", payload.get("seed"))),
        manifests=tuple(manifests),
        backend=backend,
        generation=generation,
        k=payload.get("k", 5),
        refinement_budget=payload.get("refinement_budget", DEFAULT_ROUND_BUDGET),
        subset_mode=payload.get("subset_mode", "sample"),
        workers=payload.get("workers", 4),
        ks_mode=payload.get("ks_mode", "discrete"),
        digest=config_digest(payload),
    )


# ---------------------------------------------------------------------------
# Stages
# ---------------------------------------------------------------------------


class StageError(Exception):
    """A stage failed; the run directory may hold partial outputs."""


def stage_ingest(config: RunConfig, out: Path) -> None:
    """Load every manifest, pick the evaluation subset, persist records."""
    records_out: list[dict[str, Any]] = []
    reports: dict[str, Any] = {}
    for manifest in config.manifests:
        records, load_report = load_dataset(manifest)
        if manifest.sample_count is not None:
            records = select_subset(
                records, manifest.sample_count, config.seed, mode=config.subset_mode
            )
        reports[manifest.dataset_id] = {
            **load_report.to_payload(),
            "selected": len(records),
            "subset_mode": config.subset_mode,
        }
        records_out.extend(record.to_payload() for record in records)
    stagefiles.write_jsonl(out / stagefiles.RECORDS, records_out)
    stagefiles.write_json(out / stagefiles.INGEST_REPORT, {"datasets": reports})


def _load_records(out: Path) -> list[NLIRecord]:
    return [NLIRecord.from_payload(row) for row in stagefiles.read_jsonl(out / stagefiles.RECORDS)]


def stage_filter(config: RunConfig, out: Path, client: InferenceClient) -> None:
    """Keep correctly-answered records; store their predictions for reuse."""
    records = _load_records(out)
    by_dataset: dict[str, list[NLIRecord]] = {}
    for record in records:
        by_dataset.setdefault(record.dataset_id, []).append(record)

    kept_rows: list[dict[str, Any]] = []
    dataset_reports: dict[str, Any] = {}
    for dataset_id in sorted(by_dataset):
        kept, accuracy = filter_correct(by_dataset[dataset_id], client)
        dataset_reports[dataset_id] = {
            "n_records": len(by_dataset[dataset_id]),
            "n_kept": len(kept),
            "accuracy": accuracy,
        }
        kept_rows.extend(
            {"record": record.to_payload(), "prediction": prediction.to_payload()}
            for record, prediction in kept
        )
    stagefiles.write_jsonl(out / stagefiles.FILTERED, kept_rows)
    stagefiles.write_json(
        out / stagefiles.FILTER_REPORT,
        {
            "datasets": dataset_reports,
            "meta": {
                "config_digest": config.digest,
                "model": config.backend.models.get("nli", "unknown"),
            },
        },
    )


def _load_filtered(out: Path) -> list[tuple[NLIRecord, Prediction]]:
    rows = stagefiles.read_jsonl(out / stagefiles.FILTERED)
    return [
        (NLIRecord.from_payload(row["record"]), Prediction.from_payload(row["prediction"]))
        for row in rows
    ]


def stage_generate(config: RunConfig, out: Path, client: InferenceClient) -> None:
    """Acquire accepted variations for every kept record, concurrently."""
    filtered = _load_filtered(out)

    def work(item: tuple[NLIRecord, Prediction]) -> VariationSet:
        record, prediction = item
        return acquire_variations(
            record,
            prediction,
            k=config.k,
            budget=config.refinement_budget,
            generator=client,
            classifier=client,
            params_for_round=lambda round_number: config.params_for(
                record.record_id, round_number
            ),
        )

    with ThreadPoolExecutor(max_workers=config.workers) as executor:
        sets = list(executor.map(work, filtered))

    dataset_reports: dict[str, dict[str, int]] = {}
    for vset in sets:
        entry = dataset_reports.setdefault(
            vset.dataset_id,
            {"sets": 0, "excluded": 0, "shortfall": 0, "accepted_candidates": 0},
        )
        entry["sets"] += 1
        entry["excluded"] += vset.excluded
        entry["shortfall"] += vset.shortfall and not vset.excluded
        entry["accepted_candidates"] += len(vset.candidates)

    stagefiles.write_jsonl(out / stagefiles.VARIATIONS, (s.to_payload() for s in sets))
    stagefiles.write_json(out / stagefiles.VARIATION_REPORT, {"datasets": dataset_reports})


def _load_variations(out: Path) -> list[VariationSet]:
    return [
        VariationSet.from_payload(row) for row in stagefiles.read_jsonl(out / stagefiles.VARIATIONS)
    ]


def stage_evaluate(config: RunConfig, out: Path, client: InferenceClient) -> None:
    """Re-classify variant pairs and compute fooling rates."""
    filtered = _load_filtered(out)
    originals = {record.record_id: (record, prediction) for record, prediction in filtered}
    sets = _load_variations(out)

    def work(vset: VariationSet) -> list[EvaluationPair]:
        return metrics.evaluate_variations([vset], originals, client)

    with ThreadPoolExecutor(max_workers=config.workers) as executor:
        pair_chunks = list(executor.map(work, sets))
    pairs = [pair for chunk in pair_chunks for pair in chunk]

    by_dataset: dict[str, list[EvaluationPair]] = {}
    for pair in pairs:
        by_dataset.setdefault(pair.dataset_id, []).append(pair)
    excluded_by_dataset: dict[str, int] = {}
    for vset in sets:
        excluded_by_dataset.setdefault(vset.dataset_id, 0)
        excluded_by_dataset[vset.dataset_id] += vset.excluded

    dataset_rates = {
        dataset_id: metrics.fooling_rates(
            by_dataset.get(dataset_id, []), excluded=excluded_by_dataset.get(dataset_id, 0)
        )
        for dataset_id in sorted(excluded_by_dataset)
    }
    overall = metrics.fooling_rates(pairs, excluded=sum(excluded_by_dataset.values()))
    rates_payload: dict[str, Any] = {
        "datasets": {ds: rates.to_payload() for ds, rates in dataset_rates.items()},
        "overall": overall.to_payload(),
    }
    nonempty = [rates for rates in dataset_rates.values() if rates.n_evaluated > 0]
    if nonempty:
        strict_w, relaxed_w = metrics.weighted_average(nonempty)
        rates_payload["weighted"] = {"strict": strict_w, "relaxed": relaxed_w}
    else:
        rates_payload["weighted"] = None

    stagefiles.write_jsonl(out / stagefiles.PAIRS, (pair.to_payload() for pair in pairs))
    report_mod.write_rates_file(out / stagefiles.RATES, rates_payload)
    (out / stagefiles.RATES_CSV).write_text(
        report_mod.csv_from_rates(rates_payload), encoding="utf-8"
    )


def stage_analyze(config: RunConfig, out: Path, client: InferenceClient, ks_mode: str | None = None) -> None:
    """Distribution-shift statistics, cosine distances, token overlap."""
    ks_mode = ks_mode or config.ks_mode
    records = {record.record_id: record for record in _load_records(out)}
    sets = _load_variations(out)
    pairs = [
        EvaluationPair.from_payload(row) for row in stagefiles.read_jsonl(out / stagefiles.PAIRS)
    ]

    embeddings: dict[tuple[str, int], float] = {}
    token_pairs_by_dataset: dict[str, list[analysis.TokenPairStats]] = {}
    for vset in sets:
        if vset.excluded:
            continue
        record = records[vset.record_id]
        parent_vector = client.embed(record.hypothesis)
        bucket = token_pairs_by_dataset.setdefault(vset.dataset_id, [])
        for candidate in vset.candidates:
            variant_vector = client.embed(candidate.text)
            embeddings[(vset.record_id, candidate.index)] = analysis.cosine_distance(
                parent_vector, variant_vector
            )
            bucket.append(analysis.token_stats(record.hypothesis, candidate.text))

    divergence = analysis.group_divergence_analysis(pairs, embeddings=embeddings, ks_mode=ks_mode)
    token_payload = {
        "datasets": {
            ds: analysis.aggregate_token_stats(items).to_payload()
            for ds, items in sorted(token_pairs_by_dataset.items())
        },
        "overall": analysis.aggregate_token_stats(
            [item for items in token_pairs_by_dataset.values() for item in items]
        ).to_payload(),
    }
    stagefiles.write_json(
        out / stagefiles.ANALYSIS,
        {
            "divergence": divergence.to_payload(),
            "token_stats": token_payload,
            "ks_mode": ks_mode,
        },
    )


def stage_report(config: RunConfig, out: Path, cache_entries: int | None = None) -> report_mod.RunReport:
    """Aggregate, cross-check, and render the run report.

    The columnar summary the evaluate stage emitted is consumed here and
    must agree byte-for-byte with a rendering of the cross-checked rates.
    """
    run_report = report_mod.aggregate(out, cache_entries=cache_entries)
    rendered_csv = report_mod.render(run_report, "delimited")
    csv_path = out / stagefiles.RATES_CSV
    if csv_path.exists() and csv_path.read_bytes() != rendered_csv:
        raise report_mod.ConsistencyError(
            f"{stagefiles.RATES_CSV} does not match the cross-checked rates"
        )
    (out / stagefiles.REPORT_JSON).write_bytes(report_mod.render(run_report, "json"))
    (out / stagefiles.REPORT_MD).write_bytes(report_mod.render(run_report, "markdown-table"))
    csv_path.write_bytes(rendered_csv)
    return run_report


STAGE_ORDER = ("ingest", "filter", "generate", "evaluate", "analyze", "report")
