"""Aggregation of stage outputs into tables and machine-readable exports.

The report is a pure projection of the persisted stage files: every rate
it shows is recomputed from the pairs file and cross-checked against the
rates file before anything is rendered, so an inconsistent run directory
fails loudly instead of producing a plausible-looking table.  Percentages
are rounded half-even to two decimals, and strict/relaxed pairs render as
"6.64%/12.35%" cells.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from decimal import ROUND_HALF_EVEN, Decimal
from pathlib import Path
from typing import Any, Mapping

from semsens import metrics, stagefiles
from semsens.core import Label
from semsens.metrics import EvaluationPair, FoolingRates


class ConsistencyError(Exception):
    """Stage outputs disagree with each other; the run is not reportable."""


def round_half_even(value: float, digits: int = 2) -> Decimal:
    quantum = Decimal(1).scaleb(-digits)
    return Decimal(repr(value)).quantize(quantum, rounding=ROUND_HALF_EVEN)


def format_percent(fraction: float) -> str:
    """0.0664 -> '6.64%' (half-even at two decimals)."""
    return f"{round_half_even(fraction * 100.0)}%"


def format_rate_pair(strict: float | None, relaxed: float | None) -> str:
    if strict is None or relaxed is None:
        return "-"
    return f"{format_percent(strict)}/{format_percent(relaxed)}"


def _format_stat(value: float | None) -> str:
    if value is None:
        return "-"
    return f"{round_half_even(value, 4)}"


@dataclass(frozen=True, slots=True)
class RunReport:
    """Complete aggregated view of one run, ready to render."""

    run_id: str
    config_digest: str
    model: str
    accuracy: Mapping[str, Any]
    rates: Mapping[str, Any]
    divergence: Mapping[str, Any]
    token_stats: Mapping[str, Any]
    counts: Mapping[str, Any]
    provenance: Mapping[str, Any]

    def to_payload(self) -> dict[str, Any]:
        return {
            "run_id": self.run_id,
            "config_digest": self.config_digest,
            "model": self.model,
            "accuracy": dict(self.accuracy),
            "rates": dict(self.rates),
            "divergence": dict(self.divergence),
            "token_stats": dict(self.token_stats),
            "counts": dict(self.counts),
            "provenance": dict(self.provenance),
        }


def _check(condition: bool, message: str) -> None:
    if not condition:
        raise ConsistencyError(message)


def write_rates_file(path: Path, rates_payload: Mapping[str, Any]) -> None:
    """Persist rates as newline-delimited JSON, one grouping per line."""
    lines: list[dict[str, Any]] = []
    for dataset_id, entry in sorted(rates_payload["datasets"].items()):
        lines.append({"grouping": dataset_id, "scope": "dataset", "rates": entry})
    lines.append({"grouping": "overall", "scope": "overall", "rates": rates_payload["overall"]})
    lines.append(
        {"grouping": "weighted", "scope": "weighted", "rates": rates_payload["weighted"]}
    )
    stagefiles.write_jsonl(path, lines)


def read_rates_file(path: Path) -> dict[str, Any]:
    """Inverse of write_rates_file."""
    payload: dict[str, Any] = {"datasets": {}, "overall": None, "weighted": None}
    for row in stagefiles.read_jsonl(path):
        if row["scope"] == "dataset":
            payload["datasets"][row["grouping"]] = row["rates"]
        elif row["scope"] in ("overall", "weighted"):
            payload[row["scope"]] = row["rates"]
        else:
            raise ConsistencyError(f"unknown rates grouping scope: {row['scope']!r}")
    if payload["overall"] is None:
        raise ConsistencyError(f"rates file {path} lacks the overall grouping")
    return payload


def _rates_equal(stored: Mapping[str, Any], computed: FoolingRates) -> bool:
    if stored["n_evaluated"] != computed.n_evaluated:
        return False
    if stored["strict"] != computed.strict or stored["relaxed"] != computed.relaxed:
        return False
    stored_classes = stored.get("per_class", {})
    computed_classes = {str(k): v.to_payload() for k, v in computed.per_class.items()}
    return stored_classes == computed_classes


def aggregate(out_dir: str | Path, *, cache_entries: int | None = None) -> RunReport:
    """Build a RunReport from a completed run directory.

    Re-derives the fooling rates from the persisted pairs and refuses to
    report when any stage file disagrees with another.
    """
    out = Path(out_dir)
    ingest_report = stagefiles.read_json(out / stagefiles.INGEST_REPORT)
    filter_report = stagefiles.read_json(out / stagefiles.FILTER_REPORT)
    variation_report = stagefiles.read_json(out / stagefiles.VARIATION_REPORT)
    rates_payload = read_rates_file(out / stagefiles.RATES)
    analysis_payload = stagefiles.read_json(out / stagefiles.ANALYSIS)
    pair_rows = stagefiles.read_jsonl(out / stagefiles.PAIRS)
    run_meta = stagefiles.read_json(out / stagefiles.FILTER_REPORT).get("meta", {})

    pairs = [EvaluationPair.from_payload(row) for row in pair_rows]
    pairs_by_dataset: dict[str, list[EvaluationPair]] = {}
    for pair in pairs:
        pairs_by_dataset.setdefault(pair.dataset_id, []).append(pair)

    # Re-derive every rate from the pairs file and compare exactly.
    excluded_by_dataset = {
        ds: entry.get("excluded", 0) for ds, entry in variation_report["datasets"].items()
    }
    for dataset_id, stored in rates_payload["datasets"].items():
        computed = metrics.fooling_rates(
            pairs_by_dataset.get(dataset_id, []), excluded=excluded_by_dataset.get(dataset_id, 0)
        )
        _check(
            _rates_equal(stored, computed),
            f"rates for dataset {dataset_id!r} do not match the pairs file",
        )
        if stored["strict"] is not None:
            _check(
                0.0 <= stored["strict"] <= stored["relaxed"] <= 1.0,
                f"rate ordering violated for dataset {dataset_id!r}",
            )

    overall_stored = rates_payload["overall"]
    overall_computed = metrics.fooling_rates(
        pairs, excluded=sum(excluded_by_dataset.values())
    )
    _check(
        _rates_equal(overall_stored, overall_computed),
        "overall rates do not match the pairs file",
    )

    per_dataset_rates = [
        metrics.fooling_rates(pairs_by_dataset.get(ds, []))
        for ds in rates_payload["datasets"]
    ]
    evaluated_total = sum(r.n_evaluated for r in per_dataset_rates)
    if evaluated_total:
        strict_w, relaxed_w = metrics.weighted_average(per_dataset_rates)
        stored_w = rates_payload["weighted"]
        _check(
            math.isclose(stored_w["strict"], strict_w, abs_tol=1e-12)
            and math.isclose(stored_w["relaxed"], relaxed_w, abs_tol=1e-12),
            "weighted averages do not match the per-dataset rates",
        )

    groups = analysis_payload["divergence"]["groups"]
    flip_count = (groups.get("flip") or {}).get("count", 0)
    noflip_count = (groups.get("no_flip") or {}).get("count", 0)
    _check(
        flip_count + noflip_count == len(pairs),
        f"analysis covers {flip_count + noflip_count} pairs but the pairs file has {len(pairs)}",
    )
    _check(
        (groups.get("original") or {}).get("count", 0) == overall_computed.n_evaluated,
        "analysis original-group count does not match evaluated records",
    )

    counts = {
        "records_loaded": sum(d["loaded"] for d in ingest_report["datasets"].values()),
        "records_dropped": sum(d["dropped"] for d in ingest_report["datasets"].values()),
        "records_kept": sum(d["n_kept"] for d in filter_report["datasets"].values()),
        "records_evaluated": overall_computed.n_evaluated,
        "records_excluded": sum(excluded_by_dataset.values()),
        "shortfall_records": sum(
            entry.get("shortfall", 0) for entry in variation_report["datasets"].values()
        ),
        "evaluation_pairs": len(pairs),
    }

    provenance: dict[str, Any] = {"stages": {}}
    for name in (
        stagefiles.RECORDS,
        stagefiles.FILTERED,
        stagefiles.VARIATIONS,
        stagefiles.PAIRS,
    ):
        path = out / name
        provenance["stages"][name] = {"sha256": stagefiles.file_digest(path)}
    if cache_entries is not None:
        provenance["cache_entries"] = cache_entries

    config_digest = run_meta.get("config_digest", "unknown")
    return RunReport(
        run_id=config_digest[:12],
        config_digest=config_digest,
        model=run_meta.get("model", "unknown"),
        accuracy=filter_report["datasets"],
        rates=rates_payload,
        divergence={
            "groups": groups,
            "deltas": analysis_payload["divergence"]["deltas"],
            "cosine_hist_jsd": analysis_payload["divergence"].get("cosine_hist_jsd"),
            "ks_mode": analysis_payload.get("ks_mode", "discrete"),
        },
        token_stats=analysis_payload["token_stats"],
        counts=counts,
        provenance=provenance,
    )


# ---------------------------------------------------------------------------
# Rendering
# ---------------------------------------------------------------------------


def render(report: RunReport, fmt: str) -> bytes:
    """Render a report deterministically as markdown, CSV, or JSON."""
    if fmt == "markdown-table":
        return _render_markdown(report).encode("utf-8")
    if fmt == "delimited":
        return _render_csv(report).encode("utf-8")
    if fmt == "json":
        payload = stagefiles.dumps_canonical(report.to_payload())
        return (payload + "\n").encode("utf-8")
    raise ValueError(f"unknown report format: {fmt!r}")


def _md_table(header: list[str], rows: list[list[str]]) -> list[str]:
    lines = ["| " + " | ".join(header) + " |", "|" + "|".join("---" for _ in header) + "|"]
    lines.extend("| " + " | ".join(row) + " |" for row in rows)
    return lines


_CLASS_COLUMNS = [str(label) for label in Label]


def _render_markdown(report: RunReport) -> str:
    lines: list[str] = []
    lines.append("# Semantic sensitivity report")
    lines.append("")
    lines.append(
        f"Run `{report.run_id}` - model `{report.model}`, "
        f"config digest `{report.config_digest}`."
    )
    lines.append("")

    lines.append("## Classifier accuracy before variation")
    lines.append("")
    rows = [
        [ds, str(entry["n_records"]), format_percent(entry["accuracy"])]
        for ds, entry in sorted(report.accuracy.items())
    ]
    lines.extend(_md_table(["dataset", "n", "accuracy"], rows))
    lines.append("")

    lines.append("## Fooling rates (strict/relaxed)")
    lines.append("")
    rows = []
    for ds, entry in sorted(report.rates["datasets"].items()):
        rows.append(
            [ds, str(entry["n_evaluated"]), format_rate_pair(entry["strict"], entry["relaxed"])]
        )
    weighted = report.rates.get("weighted")
    if weighted:
        total_n = sum(e["n_evaluated"] for e in report.rates["datasets"].values())
        rows.append(
            [
                "weighted average",
                str(total_n),
                format_rate_pair(weighted["strict"], weighted["relaxed"]),
            ]
        )
    lines.extend(_md_table(["dataset", "n'", report.model], rows))
    lines.append("")

    lines.append("## Fooling rates by original label (strict/relaxed)")
    lines.append("")
    rows = []
    for ds, entry in sorted(report.rates["datasets"].items()):
        per_class = entry.get("per_class", {})
        row = [ds]
        for column in _CLASS_COLUMNS:
            cell = per_class.get(column)
            row.append(format_rate_pair(cell["strict"], cell["relaxed"]) if cell else "-")
        row.append(format_rate_pair(entry["strict"], entry["relaxed"]))
        rows.append(row)
    lines.extend(_md_table(["dataset", *_CLASS_COLUMNS, "all"], rows))
    lines.append("")

    lines.append("## Predictive-distribution shift by flip group")
    lines.append("")
    rows = []
    for tag in ("original", "no_flip", "flip"):
        entry = report.divergence["groups"].get(tag)
        if not entry:
            rows.append([tag, "absent", "-", "-", "-", "-"])
            continue
        rows.append(
            [
                tag,
                str(entry["count"]),
                _format_stat(entry.get("mean_jsd")),
                _format_stat(entry.get("ks_statistic")),
                _format_stat(entry.get("mean_sigma")),
                _format_stat(entry.get("mean_cosine_distance")),
            ]
        )
    lines.extend(
        _md_table(
            ["group", "count", "mean JSD (bits)", "K-S", "mean sigma", "mean cosine dist"],
            rows,
        )
    )
    lines.append("")
    deltas = report.divergence["deltas"]
    lines.append(
        "Flip minus no-flip: JSD "
        + _format_stat(deltas.get("jsd"))
        + ", K-S "
        + _format_stat(deltas.get("ks"))
        + "; sigma drop vs original: "
        + _format_stat(deltas.get("sigma"))
        + "."
    )
    cosine_hist = report.divergence.get("cosine_hist_jsd")
    if cosine_hist is not None:
        lines.append(
            "Cosine-distance histogram JSD (flip vs no flip): "
            + _format_stat(cosine_hist)
            + "."
        )
    lines.append("")

    lines.append("## Token overlap between hypotheses and accepted variants")
    lines.append("")
    rows = []
    for ds, entry in sorted(report.token_stats["datasets"].items()):
        rows.append(
            [
                ds,
                _format_stat(entry["fuzzy_match_percent"]),
                _format_stat(entry["avg_length_original"]),
                _format_stat(entry["avg_length_variant"]),
                _format_stat(entry["avg_exact_overlap"]),
            ]
        )
    lines.extend(
        _md_table(
            [
                "dataset",
                "fuzzy token match %",
                "average length h",
                "average length h'",
                "average token overlap",
            ],
            rows,
        )
    )
    lines.append("")

    lines.append("## Run counts")
    lines.append("")
    for key in sorted(report.counts):
        lines.append(f"- {key}: {report.counts[key]}")
    lines.append("")
    return "\n".join(lines)


def _render_csv(report: RunReport) -> str:
    return csv_from_rates(report.rates)


def csv_from_rates(rates_payload: Mapping[str, Any]) -> str:
    """Columnar summary of a rates payload, one row per dataset."""
    header = [
        "dataset",
        "n_evaluated",
        "strict",
        "relaxed",
        *[f"{column}_strict" for column in _CLASS_COLUMNS],
        *[f"{column}_relaxed" for column in _CLASS_COLUMNS],
        "excluded",
    ]
    lines = [",".join(header)]
    for ds, entry in sorted(rates_payload["datasets"].items()):
        per_class = entry.get("per_class", {})
        row = [
            ds,
            str(entry["n_evaluated"]),
            _csv_rate(entry["strict"]),
            _csv_rate(entry["relaxed"]),
        ]
        for column in _CLASS_COLUMNS:
            cell = per_class.get(column)
            row.append(_csv_rate(cell["strict"]) if cell else "")
        for column in _CLASS_COLUMNS:
            cell = per_class.get(column)
            row.append(_csv_rate(cell["relaxed"]) if cell else "")
        row.append(str(entry.get("excluded", 0)))
        lines.append(",".join(row))
    return "\n".join(lines) + "\n"


def _csv_rate(value: float | None) -> str:
    return "" if value is None else repr(value)
