"""Evaluation statistics.

Rank correlations (tie-corrected Kendall tau-b, Spearman rho on average
ranks), MAE/RMSE, grouped-tie precision-recall curves with step-wise average
precision, confusion matrices, Cohen's kappa, and block-coarsened agreement.

The rank correlations are computed from exact integer pair/rank sums so that
results are bit-identical to naive reference implementations.
"""

from __future__ import annotations

import io
from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np

from .errors import ConfigError, DegenerateInput, ParseError, ShapeError


class RankCorrelation(NamedTuple):
    """Correlation value plus a flag set when one side was fully tied.

    A constant predictor makes the coefficient undefined; it is reported
    as 0.0 with degenerate=True so evaluation pipelines never abort.
    """

    value: float
    degenerate: bool


@dataclass(frozen=True)
class MetricsReport:
    """The four headline numbers for a prediction batch."""

    kendall: float
    spearman: float
    mae: float
    rmse: float
    n: int
    kendall_degenerate: bool = False
    spearman_degenerate: bool = False

    def to_dict(self) -> dict:
        return {
            "kendall": self.kendall,
            "spearman": self.spearman,
            "mae": self.mae,
            "rmse": self.rmse,
            "n": self.n,
            "kendall_degenerate": self.kendall_degenerate,
            "spearman_degenerate": self.spearman_degenerate,
        }


@dataclass(frozen=True)
class PrCurve:
    """Precision-recall points after each tied-score group, plus step AP."""

    recall: tuple[float, ...]
    precision: tuple[float, ...]
    area: float
    positives: int

    def points(self) -> list[tuple[float, float]]:
        return list(zip(self.recall, self.precision))

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write("recall,precision\n")
        for r, p in zip(self.recall, self.precision):
            buf.write(f"{r:.10g},{p:.10g}\n")
        return buf.getvalue()

    def to_dict(self) -> dict:
        return {
            "recall": list(self.recall),
            "precision": list(self.precision),
            "area": self.area,
            "positives": self.positives,
        }


@dataclass(frozen=True)
class ConfusionMatrix:
    """Square count matrix over an ordered label set."""

    labels: tuple[str, ...]
    counts: np.ndarray

    def __post_init__(self):
        c = np.asarray(self.counts, dtype=np.int64)
        if c.ndim != 2 or c.shape[0] != c.shape[1] or c.shape[0] != len(self.labels):
            raise ShapeError(f"counts must be square over {len(self.labels)} labels")
        if np.any(c < 0):
            raise ShapeError("counts must be non-negative")
        object.__setattr__(self, "counts", c)

    @property
    def row_totals(self) -> np.ndarray:
        return self.counts.sum(axis=1)

    @property
    def col_totals(self) -> np.ndarray:
        return self.counts.sum(axis=0)

    @property
    def total(self) -> int:
        return int(self.counts.sum())


def _as_1d(v, name: str) -> np.ndarray:
    arr = np.asarray(v, dtype=np.float64)
    if arr.ndim != 1:
        raise ShapeError(f"{name} must be one-dimensional")
    return arr


def _check_pair(x, y, min_len: int) -> tuple[np.ndarray, np.ndarray]:
    xa, ya = _as_1d(x, "x"), _as_1d(y, "y")
    if xa.shape != ya.shape:
        raise ShapeError(f"length mismatch: {xa.size} vs {ya.size}")
    if xa.size < min_len:
        raise DegenerateInput(f"need at least {min_len} points, got {xa.size}")
    return xa, ya


def kendall_tau_b(x: Sequence[float], y: Sequence[float]) -> RankCorrelation:
    """Tie-corrected Kendall correlation (C-D)/sqrt((C+D+Tx)(C+D+Ty)).

    Pairs tied on both sides count toward neither correction term. Built
    from comparison-only integer pair counts.
    """
    xa, ya = _check_pair(x, y, 2)
    n = xa.size
    concordant = discordant = ties_x = ties_y = 0
    for i in range(n - 1):
        dx = (xa[i + 1 :] > xa[i]).astype(np.int8) - (xa[i + 1 :] < xa[i]).astype(np.int8)
        dy = (ya[i + 1 :] > ya[i]).astype(np.int8) - (ya[i + 1 :] < ya[i]).astype(np.int8)
        prod = dx * dy
        concordant += int(np.sum(prod > 0))
        discordant += int(np.sum(prod < 0))
        ties_x += int(np.sum((dx == 0) & (dy != 0)))
        ties_y += int(np.sum((dy == 0) & (dx != 0)))
    denom_x = concordant + discordant + ties_x
    denom_y = concordant + discordant + ties_y
    if denom_x == 0 or denom_y == 0:
        return RankCorrelation(0.0, True)
    value = (concordant - discordant) / np.sqrt(float(denom_x) * float(denom_y))
    return RankCorrelation(float(value), False)


def _doubled_average_ranks(v: np.ndarray) -> list[int]:
    """Average ranks scaled by 2, which makes every rank an exact integer."""
    n = v.size
    order = np.argsort(v, kind="stable")
    out = [0] * n
    i = 0
    while i < n:
        j = i
        while j + 1 < n and v[order[j + 1]] == v[order[i]]:
            j += 1
        doubled = i + j + 2  # 2 * mean of one-based ranks i+1 .. j+1
        for k in range(i, j + 1):
            out[int(order[k])] = doubled
        i = j + 1
    return out


def spearman_rho(x: Sequence[float], y: Sequence[float]) -> RankCorrelation:
    """Pearson correlation of average ranks, exact in integer arithmetic."""
    xa, ya = _check_pair(x, y, 2)
    rx = _doubled_average_ranks(xa)
    ry = _doubled_average_ranks(ya)
    n = len(rx)
    sum_x, sum_y = sum(rx), sum(ry)
    sum_xx = sum(r * r for r in rx)
    sum_yy = sum(r * r for r in ry)
    sum_xy = sum(a * b for a, b in zip(rx, ry))
    var_x = n * sum_xx - sum_x * sum_x
    var_y = n * sum_yy - sum_y * sum_y
    if var_x == 0 or var_y == 0:
        return RankCorrelation(0.0, True)
    cov = n * sum_xy - sum_x * sum_y
    return RankCorrelation(float(cov / np.sqrt(float(var_x) * float(var_y))), False)


def mae(x: Sequence[float], y: Sequence[float]) -> float:
    xa, ya = _check_pair(x, y, 1)
    return float(np.mean(np.abs(xa - ya)))


def rmse(x: Sequence[float], y: Sequence[float]) -> float:
    xa, ya = _check_pair(x, y, 1)
    return float(np.sqrt(np.mean((xa - ya) ** 2)))


def pr_curve(scores: Sequence[float], labels: Sequence[bool]) -> PrCurve:
    """Precision-recall curve over descending scores with ties grouped.

    All items sharing a score enter the ranking together, so the curve and
    its step-wise average precision do not depend on input order.
    """
    s = _as_1d(scores, "scores")
    lab = np.asarray(labels, dtype=bool)
    if lab.ndim != 1 or lab.shape != s.shape:
        raise ShapeError(f"length mismatch: {s.size} scores vs {lab.size} labels")
    positives = int(lab.sum())
    if positives == 0:
        raise DegenerateInput("precision-recall needs at least one positive label")

    order = np.argsort(-s, kind="stable")
    s_sorted, lab_sorted = s[order], lab[order]
    recalls: list[float] = []
    precisions: list[float] = []
    area = 0.0
    tp = fp = 0
    prev_recall = 0.0
    i = 0
    n = s.size
    while i < n:
        j = i
        while j + 1 < n and s_sorted[j + 1] == s_sorted[i]:
            j += 1
        group = lab_sorted[i : j + 1]
        tp += int(group.sum())
        fp += int((~group).sum())
        precision = tp / (tp + fp)
        recall = tp / positives
        area += (recall - prev_recall) * precision
        prev_recall = recall
        recalls.append(recall)
        precisions.append(precision)
        i = j + 1
    return PrCurve(tuple(recalls), tuple(precisions), float(area), positives)


def confusion(
    labels_a: Sequence[str], labels_b: Sequence[str], label_order: Sequence[str]
) -> ConfusionMatrix:
    """Count matrix with rows from labels_a and columns from labels_b."""
    if len(labels_a) != len(labels_b):
        raise ShapeError(f"length mismatch: {len(labels_a)} vs {len(labels_b)}")
    index = {lab: i for i, lab in enumerate(label_order)}
    if len(index) != len(label_order):
        raise ConfigError("label_order contains duplicates")
    counts = np.zeros((len(label_order), len(label_order)), dtype=np.int64)
    for a, b in zip(labels_a, labels_b):
        if a not in index:
            raise ParseError(f"unknown label {a!r}")
        if b not in index:
            raise ParseError(f"unknown label {b!r}")
        counts[index[a], index[b]] += 1
    return ConfusionMatrix(tuple(label_order), counts)


def cohens_kappa(m: ConfusionMatrix) -> float:
    """Chance-corrected agreement (p_o - p_e)/(1 - p_e)."""
    total = m.total
    if total <= 0:
        raise DegenerateInput("empty confusion matrix")
    p_observed = float(np.trace(m.counts)) / total
    p_expected = float(np.dot(m.row_totals, m.col_totals)) / (total * total)
    if p_expected >= 1.0:
        raise DegenerateInput("chance agreement is 1; kappa undefined")
    return (p_observed - p_expected) / (1.0 - p_expected)


def coarse_agreement(
    m: ConfusionMatrix, low_block: Sequence[str], high_block: Sequence[str]
) -> float:
    """Fraction of mass where both sides fall in the same coarse block."""
    index = {lab: i for i, lab in enumerate(m.labels)}
    low = [index[lab] if lab in index else _unknown(lab) for lab in low_block]
    high = [index[lab] if lab in index else _unknown(lab) for lab in high_block]
    if set(low) & set(high):
        raise ConfigError("low and high blocks overlap")
    total = m.total
    if total <= 0:
        raise DegenerateInput("empty confusion matrix")
    agree = m.counts[np.ix_(low, low)].sum() + m.counts[np.ix_(high, high)].sum()
    return float(agree) / total


def _unknown(lab: str):
    raise ParseError(f"label {lab!r} not in matrix label order")
