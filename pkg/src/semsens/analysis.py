"""Predictive-inconsistency statistics over classifier output distributions.

Divergences are computed in bits (log base 2), which bounds the
Jensen-Shannon divergence of two distributions to [0, 1].  The discrete
Kolmogorov-Smirnov statistic is taken over the fixed label ordering
(entailment, neutral, contradiction); a conventional two-sample K-S over
scalar confidence samples is available as an alternative mode.
"""

from __future__ import annotations

import math
import unicodedata
from dataclasses import dataclass, field
from typing import Any, Iterable, Mapping, Sequence

from semsens.core import LabelDistribution, nfc
from semsens.metrics import EvaluationPair, FlipType

# Population standard deviation of a one-hot 3-class distribution.
SIGMA_MAX = math.sqrt(2.0) / 3.0

# Binning for the cosine-distance histograms compared across groups.
COSINE_HIST_BINS = 50
COSINE_HIST_RANGE = (0.0, 2.0)

FUZZY_SIMILARITY_THRESHOLD = 0.8


class SupportViolationError(ValueError):
    """KL divergence is undefined when Q lacks mass where P has some."""


def _kl_bits(p: Sequence[float], q: Sequence[float]) -> float:
    terms = []
    for pi, qi in zip(p, q):
        if pi == 0.0:
            continue
        if qi == 0.0:
            raise SupportViolationError(
                f"P has mass {pi} where Q has none; KL(P||Q) is undefined"
            )
        terms.append(pi * math.log2(pi / qi))
    return max(math.fsum(terms), 0.0)


def kl_divergence(p: LabelDistribution, q: LabelDistribution) -> float:
    """Kullback-Leibler divergence D(P||Q) in bits.

    Zero-probability components of P contribute nothing; a component where
    Q is zero but P is not raises SupportViolationError.
    """
    return _kl_bits(p.as_tuple(), q.as_tuple())


def _jsd_bits(p: Sequence[float], q: Sequence[float]) -> float:
    m = [(pi + qi) / 2.0 for pi, qi in zip(p, q)]
    # M dominates both inputs, so the KL terms can never hit a support hole.
    value = 0.5 * _kl_bits(p, m) + 0.5 * _kl_bits(q, m)
    return min(max(value, 0.0), 1.0)


def js_divergence(p: LabelDistribution, q: LabelDistribution) -> float:
    """Jensen-Shannon divergence in bits: JSD = (D(P||M) + D(Q||M)) / 2.

    Symmetric, non-negative, and bounded by 1 bit.
    """
    return _jsd_bits(p.as_tuple(), q.as_tuple())


def ks_statistic_discrete(p: LabelDistribution, q: LabelDistribution) -> float:
    """Max absolute CDF gap over the fixed label ordering; in [0, 1]."""
    cdf_p = cdf_q = 0.0
    worst = 0.0
    for pi, qi in zip(p.as_tuple(), q.as_tuple()):
        cdf_p += pi
        cdf_q += qi
        worst = max(worst, abs(cdf_p - cdf_q))
    return min(worst, 1.0)


def two_sample_ks(xs: Sequence[float], ys: Sequence[float]) -> float:
    """Classical two-sample K-S statistic over scalar samples."""
    if not xs or not ys:
        raise ValueError("two_sample_ks requires non-empty samples")
    sx, sy = sorted(xs), sorted(ys)
    nx, ny = len(sx), len(sy)
    i = j = 0
    worst = 0.0
    while i < nx and j < ny:
        d = min(sx[i], sy[j])
        while i < nx and sx[i] <= d:
            i += 1
        while j < ny and sy[j] <= d:
            j += 1
        worst = max(worst, abs(i / nx - j / ny))
    return worst


def softmax_std(p: LabelDistribution) -> float:
    """Population standard deviation of the three components.

    Ranges from 0 (uniform) to sqrt(2)/3 ~ 0.4714 (one-hot); larger values
    indicate a more confident prediction.
    """
    comps = p.as_tuple()
    mean = math.fsum(comps) / 3.0
    var = math.fsum((c - mean) ** 2 for c in comps) / 3.0
    return math.sqrt(var)


def cosine_distance(u: Sequence[float], v: Sequence[float]) -> float:
    """1 - cos(u, v); in [0, 2]. Rejects zero vectors and mixed dimensions."""
    if len(u) != len(v):
        raise ValueError(f"dimension mismatch: {len(u)} vs {len(v)}")
    dot = math.fsum(a * b for a, b in zip(u, v))
    nu = math.sqrt(math.fsum(a * a for a in u))
    nv = math.sqrt(math.fsum(b * b for b in v))
    if nu == 0.0 or nv == 0.0:
        raise ValueError("cosine distance is undefined for zero vectors")
    return min(max(1.0 - dot / (nu * nv), 0.0), 2.0)


# ---------------------------------------------------------------------------
# Token-level statistics
# ---------------------------------------------------------------------------


def tokenize(text: str) -> list[str]:
    """Lowercase, NFC-normalize, split on whitespace, strip edge punctuation.

    Tokens that are pure punctuation vanish.
    """
    tokens = []
    for raw in nfc(text).lower().split():
        token = _strip_edge_punctuation(raw)
        if token:
            tokens.append(token)
    return tokens


def _strip_edge_punctuation(token: str) -> str:
    start, end = 0, len(token)
    while start < end and unicodedata.category(token[start]).startswith("P"):
        start += 1
    while end > start and unicodedata.category(token[end - 1]).startswith("P"):
        end -= 1
    return token[start:end]


def _levenshtein(a: str, b: str) -> int:
    if len(a) < len(b):
        a, b = b, a
    previous = list(range(len(b) + 1))
    for i, ca in enumerate(a, start=1):
        current = [i]
        for j, cb in enumerate(b, start=1):
            cost = 0 if ca == cb else 1
            current.append(min(previous[j] + 1, current[j - 1] + 1, previous[j - 1] + cost))
        previous = current
    return previous[-1]


def edit_similarity(a: str, b: str) -> float:
    """Normalized edit similarity: 1 - levenshtein / max length."""
    if not a and not b:
        return 1.0
    return 1.0 - _levenshtein(a, b) / max(len(a), len(b))


@dataclass(frozen=True, slots=True)
class TokenPairStats:
    """Token overlap measurements for one (hypothesis, variant) pair."""

    fuzzy_match_percent: float
    length_original: int
    length_variant: int
    exact_overlap: int

    def to_payload(self) -> dict[str, Any]:
        return {
            "fuzzy_match_percent": self.fuzzy_match_percent,
            "length_original": self.length_original,
            "length_variant": self.length_variant,
            "exact_overlap": self.exact_overlap,
        }


@dataclass(frozen=True, slots=True)
class TokenStats:
    """Dataset-level averages of TokenPairStats."""

    pair_count: int
    fuzzy_match_percent: float
    avg_length_original: float
    avg_length_variant: float
    avg_exact_overlap: float

    def to_payload(self) -> dict[str, Any]:
        return {
            "pair_count": self.pair_count,
            "fuzzy_match_percent": self.fuzzy_match_percent,
            "avg_length_original": self.avg_length_original,
            "avg_length_variant": self.avg_length_variant,
            "avg_exact_overlap": self.avg_exact_overlap,
        }


def token_stats(original: str, variant: str) -> TokenPairStats:
    """Per-pair token statistics.

    Exact overlap is the multiset intersection size.  The fuzzy percentage
    counts original tokens with a greedy one-to-one partner in the variant
    at edit similarity >= FUZZY_SIMILARITY_THRESHOLD, normalized by the
    longer token count.
    """
    tokens_a = tokenize(original)
    tokens_b = tokenize(variant)
    if not tokens_a or not tokens_b:
        return TokenPairStats(0.0, len(tokens_a), len(tokens_b), 0)

    remaining = list(tokens_b)
    exact = 0
    for token in tokens_a:
        if token in remaining:
            remaining.remove(token)
            exact += 1

    taken = [False] * len(tokens_b)
    fuzzy_hits = 0
    for token in tokens_a:
        best_idx = -1
        best_sim = FUZZY_SIMILARITY_THRESHOLD
        for idx, candidate in enumerate(tokens_b):
            if taken[idx]:
                continue
            sim = edit_similarity(token, candidate)
            if sim > best_sim or (sim == best_sim and best_idx < 0):
                best_idx, best_sim = idx, sim
        if best_idx >= 0:
            taken[best_idx] = True
            fuzzy_hits += 1

    fuzzy_percent = 100.0 * fuzzy_hits / max(len(tokens_a), len(tokens_b))
    return TokenPairStats(fuzzy_percent, len(tokens_a), len(tokens_b), exact)


def aggregate_token_stats(pairs: Iterable[TokenPairStats]) -> TokenStats:
    items = list(pairs)
    if not items:
        return TokenStats(0, 0.0, 0.0, 0.0, 0.0)
    n = len(items)
    return TokenStats(
        pair_count=n,
        fuzzy_match_percent=math.fsum(s.fuzzy_match_percent for s in items) / n,
        avg_length_original=math.fsum(s.length_original for s in items) / n,
        avg_length_variant=math.fsum(s.length_variant for s in items) / n,
        avg_exact_overlap=math.fsum(s.exact_overlap for s in items) / n,
    )


# ---------------------------------------------------------------------------
# Flip / no-flip group analysis
# ---------------------------------------------------------------------------


@dataclass(frozen=True, slots=True)
class GroupStats:
    """Aggregate divergence statistics for one group of evaluation pairs.

    mean_jsd and ks_statistic compare original vs variation distributions,
    so they are absent for the original-predictions group.
    """

    group: str
    count: int
    mean_jsd: float | None
    ks_statistic: float | None
    mean_sigma: float
    mean_cosine_distance: float | None = None

    def to_payload(self) -> dict[str, Any]:
        return {
            "group": self.group,
            "count": self.count,
            "mean_jsd": self.mean_jsd,
            "ks_statistic": self.ks_statistic,
            "mean_sigma": self.mean_sigma,
            "mean_cosine_distance": self.mean_cosine_distance,
        }


@dataclass(frozen=True, slots=True)
class DivergenceReport:
    """Group statistics plus the flip-minus-noflip deltas."""

    original: GroupStats
    flip: GroupStats | None
    no_flip: GroupStats | None
    delta_jsd: float | None
    delta_ks: float | None
    delta_sigma: float | None
    cosine_hist_jsd: float | None = None
    per_pair: tuple[dict[str, Any], ...] = field(default_factory=tuple)

    def to_payload(self) -> dict[str, Any]:
        return {
            "groups": {
                "original": self.original.to_payload(),
                "flip": self.flip.to_payload() if self.flip else None,
                "no_flip": self.no_flip.to_payload() if self.no_flip else None,
            },
            "deltas": {
                "jsd": self.delta_jsd,
                "ks": self.delta_ks,
                "sigma": self.delta_sigma,
            },
            "cosine_hist_jsd": self.cosine_hist_jsd,
            "per_pair": list(self.per_pair),
        }


def _mean(values: Sequence[float]) -> float:
    return math.fsum(values) / len(values)


def _histogram(values: Sequence[float], bins: int, lo: float, hi: float) -> list[float]:
    counts = [0] * bins
    width = (hi - lo) / bins
    for v in values:
        idx = min(int((v - lo) / width), bins - 1) if v < hi else bins - 1
        counts[max(idx, 0)] += 1
    total = len(values)
    return [c / total for c in counts]


def group_divergence_analysis(
    pairs: Sequence[EvaluationPair],
    embeddings: Mapping[tuple[str, int], float] | None = None,
    ks_mode: str = "discrete",
) -> DivergenceReport:
    """Split pairs into flip / no-flip groups and aggregate statistics.

    Per pair: JSD and discrete K-S between the original and variation
    distributions, plus the softmax standard deviation of each.  The
    original group averages sigma over distinct records.  When
    ``embeddings`` maps (record_id, candidate index) to the pair's cosine
    distance, group means are added along with the JSD between the flip and
    no-flip cosine-distance histograms (50 uniform bins on [0, 2]).

    ks_mode "discrete" averages the per-pair discrete statistic;
    "samples" runs a classical two-sample K-S between original-confidence
    and variation-confidence samples within each group.
    """
    if ks_mode not in ("discrete", "samples"):
        raise ValueError(f"unknown ks_mode: {ks_mode!r}")

    originals: dict[str, LabelDistribution] = {}
    grouped: dict[str, list[tuple[EvaluationPair, float, float, float]]] = {
        "flip": [],
        "no_flip": [],
    }
    per_pair_rows: list[dict[str, Any]] = []

    for pair in pairs:
        originals.setdefault(pair.record_id, pair.original.distribution)
        jsd = js_divergence(pair.original.distribution, pair.variation.distribution)
        ks = ks_statistic_discrete(pair.original.distribution, pair.variation.distribution)
        sigma = softmax_std(pair.variation.distribution)
        tag = "no_flip" if pair.flip is FlipType.NONE else "flip"
        grouped[tag].append((pair, jsd, ks, sigma))
        row = {
            "record_id": pair.record_id,
            "candidate_index": pair.candidate_index,
            "group": tag,
            "jsd": jsd,
            "ks": ks,
            "sigma_original": softmax_std(pair.original.distribution),
            "sigma_variation": sigma,
        }
        if embeddings is not None:
            row["cosine_distance"] = embeddings.get((pair.record_id, pair.candidate_index))
        per_pair_rows.append(row)

    if not originals:
        raise ValueError("group_divergence_analysis requires at least one pair")

    original_stats = GroupStats(
        group="original",
        count=len(originals),
        mean_jsd=None,
        ks_statistic=None,
        mean_sigma=_mean([softmax_std(d) for d in originals.values()]),
    )

    def build(tag: str) -> GroupStats | None:
        members = grouped[tag]
        if not members:
            return None
        if ks_mode == "discrete":
            ks_value = _mean([ks for _, _, ks, _ in members])
        else:
            ks_value = two_sample_ks(
                [max(p.original.distribution.as_tuple()) for p, _, _, _ in members],
                [max(p.variation.distribution.as_tuple()) for p, _, _, _ in members],
            )
        cos = None
        if embeddings is not None:
            dists = [
                embeddings[(p.record_id, p.candidate_index)]
                for p, _, _, _ in members
                if (p.record_id, p.candidate_index) in embeddings
            ]
            cos = _mean(dists) if dists else None
        return GroupStats(
            group=tag,
            count=len(members),
            mean_jsd=_mean([jsd for _, jsd, _, _ in members]),
            ks_statistic=ks_value,
            mean_sigma=_mean([sigma for _, _, _, sigma in members]),
            mean_cosine_distance=cos,
        )

    flip_stats = build("flip")
    no_flip_stats = build("no_flip")

    delta_jsd = delta_ks = delta_sigma = None
    if flip_stats and no_flip_stats:
        delta_jsd = flip_stats.mean_jsd - no_flip_stats.mean_jsd
        delta_ks = flip_stats.ks_statistic - no_flip_stats.ks_statistic
    if flip_stats:
        delta_sigma = original_stats.mean_sigma - flip_stats.mean_sigma

    cosine_hist_jsd = None
    if embeddings is not None and flip_stats and no_flip_stats:
        flip_d = [
            embeddings[(p.record_id, p.candidate_index)]
            for p, _, _, _ in grouped["flip"]
            if (p.record_id, p.candidate_index) in embeddings
        ]
        noflip_d = [
            embeddings[(p.record_id, p.candidate_index)]
            for p, _, _, _ in grouped["no_flip"]
            if (p.record_id, p.candidate_index) in embeddings
        ]
        if flip_d and noflip_d:
            lo, hi = COSINE_HIST_RANGE
            hist_flip = _histogram(flip_d, COSINE_HIST_BINS, lo, hi)
            hist_noflip = _histogram(noflip_d, COSINE_HIST_BINS, lo, hi)
            cosine_hist_jsd = _jsd_bits(hist_flip, hist_noflip)

    return DivergenceReport(
        original=original_stats,
        flip=flip_stats,
        no_flip=no_flip_stats,
        delta_jsd=delta_jsd,
        delta_ks=delta_ks,
        delta_sigma=delta_sigma,
        cosine_hist_jsd=cosine_hist_jsd,
        per_pair=tuple(per_pair_rows),
    )
