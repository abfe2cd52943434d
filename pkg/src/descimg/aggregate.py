"""Score fusion: one-hot and average-reorder transforms, S/H/A metrics, class decision.

All three families sum the first min(k, rows) rows of some transform of the
score matrix and take the argmax column:

  S: the raw matrix.
  H: each row replaced by a one-hot vector at its argmax.
  A: rows sorted descending by the column with the greatest column mean.

Ties (argmax and sort order) are broken deterministically: lowest class
index wins an argmax tie, ascending original ordinal wins a sort tie.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Tuple

import numpy as np

from .model import ClassLabel, LabelSet, MetricId, ScoreMatrix


class FusionError(ValueError):
    """Raised when a fusion is requested on unusable input."""


@dataclass(frozen=True)
class FusedScores:
    """Per-class fused totals for one site under one metric."""

    metric: MetricId
    per_class: Tuple[float, ...]
    decided: ClassLabel
    images_used: int


@dataclass(frozen=True)
class OneHotMatrix:
    """Same shape as the source matrix; exactly one 1 per row."""

    site_id: str
    rows: Tuple[Tuple[int, Tuple[int, ...]], ...]


@dataclass(frozen=True)
class ReorderedMatrix:
    """Row permutation of the source, sorted by the dominant column."""

    site_id: str
    dominant_column: int
    rows: Tuple[Tuple[int, Tuple[float, ...]], ...]  # (original ordinal, scores)


def _argmax_low(vec) -> int:
    """Argmax with ties resolved to the lowest index."""
    best, best_c = vec[0], 0
    for c in range(1, len(vec)):
        if vec[c] > best:
            best, best_c = vec[c], c
    return best_c


def one_hot(m: ScoreMatrix) -> OneHotMatrix:
    """Replace each row by 1 at its argmax column and 0 elsewhere."""
    rows = []
    for ordinal, vec in m.rows:
        w = _argmax_low(vec)
        rows.append((ordinal, tuple(1 if c == w else 0 for c in range(len(vec)))))
    return OneHotMatrix(m.site_id, tuple(rows))


def average_reorder(m: ScoreMatrix) -> ReorderedMatrix:
    """Sort rows descending by the column whose mean over all rows is greatest.

    Column means are always taken over every present row; truncation happens
    later, on the reordered matrix.
    """
    if m.n_rows == 0:
        raise FusionError(f"site {m.site_id}: cannot reorder an empty matrix")
    means = m.scores().mean(axis=0)
    dom = _argmax_low(means)
    ordered = sorted(m.rows, key=lambda row: (-row[1][dom], row[0]))
    return ReorderedMatrix(m.site_id, dom, tuple(ordered))


def _sum_rows(rows, k: int, n_classes: int) -> Tuple[float, ...]:
    # Sequential row-by-row accumulation so results are bit-reproducible and
    # match a naive per-column loop exactly.
    acc = np.zeros(n_classes)
    for _, vec in rows[: min(k, len(rows))]:
        acc += np.asarray(vec, dtype=np.float64)
    return tuple(acc.tolist())


def fuse(m: ScoreMatrix, metric: MetricId, labels: LabelSet) -> FusedScores:
    """Fuse a site's score matrix under one S/H/A metric."""
    if not metric.is_fusion:
        raise FusionError("PerImage is not a fusion metric")
    if m.n_rows == 0:
        raise FusionError(f"site {m.site_id}: no evidence for site")
    if metric.family == "S":
        rows = m.rows
    elif metric.family == "H":
        rows = one_hot(m).rows
    else:
        rows = average_reorder(m).rows
    per_class = _sum_rows(rows, metric.k, len(labels))
    decided = labels[_argmax_low(per_class)]
    return FusedScores(metric, per_class, decided, min(metric.k, m.n_rows))


def classify_site(m: ScoreMatrix, metric: MetricId, labels: LabelSet) -> ClassLabel:
    """Decided class of a site under one fusion metric."""
    return fuse(m, metric, labels).decided
