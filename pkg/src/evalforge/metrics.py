"""Rank correlation, agreement, fidelity, compression, and speedup statistics."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from .domain import BalanceStats, ModelScorecard


class MetricError(ValueError):
    pass


# ---------------------------------------------------------------------------
# Rank correlations


def average_ranks(values: Sequence[float]) -> np.ndarray:
    """1-based ranks with tied values sharing their average rank."""
    x = np.asarray(values, dtype=float)
    order = np.argsort(x, kind="stable")
    ranks = np.empty(len(x), dtype=float)
    base = np.arange(1, len(x) + 1, dtype=float)
    i = 0
    sorted_x = x[order]
    while i < len(x):
        j = i
        while j + 1 < len(x) and sorted_x[j + 1] == sorted_x[i]:
            j += 1
        ranks[order[i : j + 1]] = base[i : j + 1].mean()
        i = j + 1
    return ranks


def _check_pair(a: Sequence[float], b: Sequence[float]) -> tuple[np.ndarray, np.ndarray]:
    if len(a) != len(b):
        raise MetricError(f"length mismatch: {len(a)} vs {len(b)}")
    if len(a) < 2:
        raise MetricError("need at least 2 observations")
    return np.asarray(a, dtype=float), np.asarray(b, dtype=float)


def spearman_rho(a: Sequence[float], b: Sequence[float]) -> float:
    """Product-moment correlation of average ranks. Equals 1 - 6*sum(d^2)/(n(n^2-1))
    on tie-free data."""
    x, y = _check_pair(a, b)
    rx, ry = average_ranks(x), average_ranks(y)
    if rx.std() == 0.0 or ry.std() == 0.0:
        raise MetricError("zero rank variance (all values tied)")
    return float(np.corrcoef(rx, ry)[0, 1])


def kendall_tau(a: Sequence[float], b: Sequence[float]) -> float:
    """Tie-corrected tau-b; reduces to (C - D) / (n(n-1)/2) on tie-free data."""
    x, y = _check_pair(a, b)
    dx = np.sign(x[:, None] - x[None, :])
    dy = np.sign(y[:, None] - y[None, :])
    iu = np.triu_indices(len(x), k=1)
    prod = dx[iu] * dy[iu]
    concordant_minus_discordant = float(prod.sum())
    n0 = len(x) * (len(x) - 1) / 2

    def tie_term(v: np.ndarray) -> float:
        _, counts = np.unique(v, return_counts=True)
        return float((counts * (counts - 1) / 2).sum())

    n1, n2 = tie_term(x), tie_term(y)
    denom = math.sqrt((n0 - n1) * (n0 - n2))
    if denom == 0.0:
        raise MetricError("zero rank variance (all values tied)")
    return concordant_minus_discordant / denom


# ---------------------------------------------------------------------------
# Agreement


def cohen_kappa(labels_a: Sequence, labels_b: Sequence) -> float:
    """(p_o - p_e) / (1 - p_e) with marginal-product chance agreement."""
    if len(labels_a) != len(labels_b):
        raise MetricError(f"length mismatch: {len(labels_a)} vs {len(labels_b)}")
    if not labels_a:
        raise MetricError("need at least 1 observation")
    n = len(labels_a)
    p_o = sum(1 for x, y in zip(labels_a, labels_b) if x == y) / n
    cats = sorted(set(labels_a) | set(labels_b), key=str)
    pa = {c: 0 for c in cats}
    pb = {c: 0 for c in cats}
    for x in labels_a:
        pa[x] += 1
    for y in labels_b:
        pb[y] += 1
    p_e = sum((pa[c] / n) * (pb[c] / n) for c in cats)
    if p_e == 1.0:
        raise MetricError("degenerate marginals: chance agreement is 1")
    return (p_o - p_e) / (1.0 - p_e)


def fleiss_kappa(ratings: Sequence[Sequence[int]]) -> float:
    """Fleiss' kappa over an items x categories matrix of rater counts; every
    row must sum to the same rater count n >= 2."""
    mat = np.asarray(ratings, dtype=float)
    if mat.ndim != 2 or mat.shape[0] < 1:
        raise MetricError("ratings must be a non-empty 2-D matrix")
    row_sums = mat.sum(axis=1)
    n = row_sums[0]
    if n < 2:
        raise MetricError("need at least 2 raters per item")
    if not np.all(row_sums == n):
        raise MetricError("ragged rows: all items must have the same rater count")
    observed_cats = int((mat.sum(axis=0) > 0).sum())
    if observed_cats < 2:
        raise MetricError("single category: agreement is undefined")
    p_i = ((mat * mat).sum(axis=1) - n) / (n * (n - 1))
    p_bar = float(p_i.mean())
    p_j = mat.sum(axis=0) / mat.sum()
    p_e = float((p_j * p_j).sum())
    if p_e == 1.0:
        raise MetricError("degenerate marginals: chance agreement is 1")
    return (p_bar - p_e) / (1.0 - p_e)


# ---------------------------------------------------------------------------
# Fidelity


def levenshtein(a: str, b: str) -> int:
    """Character-level edit distance (insert/delete/substitute, unit costs)."""
    if a == b:
        return 0
    if not a:
        return len(b)
    if not b:
        return len(a)
    prev = list(range(len(b) + 1))
    for i, ca in enumerate(a, start=1):
        curr = [i]
        for j, cb in enumerate(b, start=1):
            cost = 0 if ca == cb else 1
            curr.append(min(prev[j - 1] + cost, prev[j] + 1, curr[j - 1] + 1))
        prev = curr
    return prev[-1]


def pair_similarity(a: str, b: str) -> float:
    """1 - EditDist / max(len), on trailing-whitespace-trimmed text; the
    empty-vs-empty pair is defined as 1."""
    a, b = a.rstrip(), b.rstrip()
    longest = max(len(a), len(b))
    if longest == 0:
        return 1.0
    return 1.0 - levenshtein(a, b) / longest


def inference_fidelity(agent_outputs: Sequence[str], ref_outputs: Sequence[str]) -> float:
    """Mean normalized edit-distance similarity across aligned output pairs, as
    a percentage."""
    if len(agent_outputs) != len(ref_outputs):
        raise MetricError(f"length mismatch: {len(agent_outputs)} vs {len(ref_outputs)}")
    if not agent_outputs:
        raise MetricError("need at least 1 output pair")
    sims = [pair_similarity(x, y) for x, y in zip(agent_outputs, ref_outputs)]
    return float(np.mean(sims)) * 100.0


def score_fidelity(agent_score: float, ref_score: float) -> float:
    """1 - |agent - ref| / |ref|. May be negative; the reporting layer floors
    at zero for rendering."""
    if ref_score == 0:
        raise MetricError("reference score is zero; relative difference undefined")
    return 1.0 - abs(agent_score - ref_score) / abs(ref_score)


def speedup(source_hours: float, ours_hours: float) -> float:
    """Wall-clock ratio source/ours, reported to one decimal."""
    if source_hours <= 0 or ours_hours <= 0:
        raise MetricError("hours must be positive")
    return round(source_hours / ours_hours, 1)


def compression_ratio(stats: BalanceStats) -> float:
    """Fraction of the source pool removed by curation."""
    if stats.total_source <= 0:
        raise MetricError("total_source must be positive")
    return 1.0 - stats.total_retained / stats.total_source


# ---------------------------------------------------------------------------
# Reports


@dataclass(frozen=True)
class RankingReport:
    models: tuple[str, ...]
    score_columns: tuple[tuple[str, tuple[float, ...]], ...]
    pairwise: tuple[tuple[str, str, float, float], ...]  # (a, b, spearman, kendall)

    def column(self, label: str) -> tuple[float, ...]:
        for name, col in self.score_columns:
            if name == label:
                return col
        raise KeyError(label)

    def correlation(self, a: str, b: str) -> tuple[float, float]:
        for ca, cb, rho, tau in self.pairwise:
            if {ca, cb} == {a, b}:
                return rho, tau
        raise KeyError((a, b))

    def to_dict(self) -> dict:
        return {
            "models": list(self.models),
            "score_columns": {name: list(col) for name, col in self.score_columns},
            "column_order": [name for name, _ in self.score_columns],
            "pairwise": [
                {"a": a, "b": b, "spearman_rho": r, "kendall_tau": t}
                for a, b, r, t in self.pairwise
            ],
        }


def build_ranking_report(
    models: Sequence[str], columns: Mapping[str, Sequence[float]] | Sequence[tuple[str, Sequence[float]]]
) -> RankingReport:
    items = list(columns.items()) if isinstance(columns, Mapping) else list(columns)
    for label, col in items:
        if len(col) != len(models):
            raise MetricError(f"column {label!r} length {len(col)} != {len(models)} models")
    pairwise = []
    for i in range(len(items)):
        for j in range(i + 1, len(items)):
            a_label, a_col = items[i]
            b_label, b_col = items[j]
            pairwise.append(
                (a_label, b_label, spearman_rho(a_col, b_col), kendall_tau(a_col, b_col))
            )
    return RankingReport(
        models=tuple(models),
        score_columns=tuple((label, tuple(float(v) for v in col)) for label, col in items),
        pairwise=tuple(pairwise),
    )


@dataclass(frozen=True)
class AgreementReport:
    cohen_kappa: float
    fleiss_kappa: float
    per_dimension: tuple[tuple[str, float], ...] = ()

    def to_dict(self) -> dict:
        return {
            "cohen_kappa": self.cohen_kappa,
            "fleiss_kappa": self.fleiss_kappa,
            "per_dimension": {n: v for n, v in self.per_dimension},
        }


@dataclass(frozen=True)
class FidelityReport:
    """Per-dimension and overall score fidelity between an agent-built pipeline
    and a reference, in percent. Raw values may be negative; rendering floors
    at zero. ``final`` is the fidelity of the scorecard averages and is
    recomputable from the two embedded scorecards."""

    per_dimension: tuple[tuple[str, float], ...]
    final: float
    agent: ModelScorecard
    reference: ModelScorecard

    def rendered_per_dimension(self) -> dict[str, float]:
        return {n: max(v, 0.0) for n, v in self.per_dimension}

    def rendered_final(self) -> float:
        return max(self.final, 0.0)

    def to_dict(self) -> dict:
        return {
            "per_dimension": {n: v for n, v in self.per_dimension},
            "dimension_order": [n for n, _ in self.per_dimension],
            "final": self.final,
            "agent": self.agent.to_dict(),
            "reference": self.reference.to_dict(),
        }


def overall_fidelity(agent: ModelScorecard, reference: ModelScorecard) -> float:
    """Fidelity of the final (dimension-averaged) scores, in percent."""
    return score_fidelity(agent.average, reference.average) * 100.0


def build_fidelity_report(agent: ModelScorecard, reference: ModelScorecard) -> FidelityReport:
    agent_scores = agent.scores_dict()
    ref_scores = reference.scores_dict()
    if set(agent_scores) != set(ref_scores):
        raise MetricError(
            f"dimension mismatch: {sorted(agent_scores)} vs {sorted(ref_scores)}"
        )
    per = tuple(
        (name, score_fidelity(agent_scores[name], ref_scores[name]) * 100.0)
        for name, _ in reference.per_dimension_scores
    )
    return FidelityReport(
        per_dimension=per,
        final=overall_fidelity(agent, reference),
        agent=agent,
        reference=reference,
    )
