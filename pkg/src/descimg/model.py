"""Core domain types: labels, site records, score matrices, metric identifiers.

A score matrix holds one row of per-class scores for each descriptive image
of a site, in image order.  Everything downstream (fusion, evaluation) works
on these immutable values.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterator, Literal, Optional, Sequence, Tuple

import numpy as np

MAX_IMAGES = 20
SOFTMAX_ROW_TOL = 1e-4

SchemaMode = Literal["softmax", "raw"]
Split = Literal["train", "validation", "test"]

SPLITS = ("train", "validation", "test")


@dataclass(frozen=True)
class ClassLabel:
    """One class, addressed by a 0-based column index and a display name."""

    index: int
    name: str

    def __post_init__(self):
        if self.index < 0:
            raise ValueError(f"label index must be >= 0, got {self.index}")
        if not self.name:
            raise ValueError("label name must be non-empty")


@dataclass(frozen=True)
class LabelSet:
    """Ordered set of class labels; the canonical column order of every matrix."""

    labels: Tuple[ClassLabel, ...]

    def __post_init__(self):
        if len(self.labels) < 2:
            raise ValueError("a LabelSet needs at least 2 labels")
        for pos, lab in enumerate(self.labels):
            if lab.index != pos:
                raise ValueError(
                    f"label indices must be contiguous 0..C-1, got {lab.index} at position {pos}"
                )
        names = [lab.name for lab in self.labels]
        if len(set(names)) != len(names):
            raise ValueError("label names must be unique")

    @classmethod
    def from_names(cls, names: Sequence[str]) -> "LabelSet":
        return cls(tuple(ClassLabel(i, n) for i, n in enumerate(names)))

    @property
    def names(self) -> Tuple[str, ...]:
        return tuple(lab.name for lab in self.labels)

    def __len__(self) -> int:
        return len(self.labels)

    def __iter__(self) -> Iterator[ClassLabel]:
        return iter(self.labels)

    def __getitem__(self, index: int) -> ClassLabel:
        return self.labels[index]

    def by_name(self, name: str) -> ClassLabel:
        for lab in self.labels:
            if lab.name == name:
                return lab
        raise KeyError(f"unknown label {name!r}")


@dataclass(frozen=True)
class WebSiteRecord:
    """One dataset item; paths are optional and relative to the dataset root."""

    site_id: str
    url: str
    label: ClassLabel
    split: Split
    language: Optional[str] = None
    screenshot_path: Optional[str] = None
    text_path: Optional[str] = None

    def __post_init__(self):
        if not self.site_id:
            raise ValueError("site_id must be non-empty")
        if self.split not in SPLITS:
            raise ValueError(f"split must be one of {SPLITS}, got {self.split!r}")


@dataclass(frozen=True)
class ScoreMatrix:
    """Per-site matrix of per-image class scores.

    Rows are (image ordinal, score vector) pairs in strictly increasing
    ordinal order; ordinals may have gaps when a search returned fewer than
    20 images or an image was filtered.
    """

    site_id: str
    rows: Tuple[Tuple[int, Tuple[float, ...]], ...]

    @classmethod
    def from_rows(
        cls, site_id: str, rows: Sequence[Tuple[int, Sequence[float]]]
    ) -> "ScoreMatrix":
        return cls(site_id, tuple((int(o), tuple(float(s) for s in v)) for o, v in rows))

    @property
    def ordinals(self) -> Tuple[int, ...]:
        return tuple(o for o, _ in self.rows)

    @property
    def n_rows(self) -> int:
        return len(self.rows)

    @property
    def n_classes(self) -> int:
        return len(self.rows[0][1]) if self.rows else 0

    def scores(self) -> np.ndarray:
        """Row-major float64 array of shape (n_rows, C)."""
        return np.array([v for _, v in self.rows], dtype=np.float64)


# Metric identifiers ---------------------------------------------------------

TRUNCATION_LEVELS = (5, 10, 15, 20)
FAMILIES = ("S", "H", "A")


@dataclass(frozen=True)
class MetricId:
    """One of the 13 evaluation metrics: S/H/A at k in {5,10,15,20}, or PerImage."""

    family: Literal["S", "H", "A", "PerImage"]
    k: Optional[int] = None

    def __post_init__(self):
        if self.family == "PerImage":
            if self.k is not None:
                raise ValueError("PerImage takes no truncation level")
        elif self.family in FAMILIES:
            if self.k not in TRUNCATION_LEVELS:
                raise ValueError(
                    f"k must be one of {TRUNCATION_LEVELS}, got {self.k}"
                )
        else:
            raise ValueError(f"unknown metric family {self.family!r}")

    @property
    def is_fusion(self) -> bool:
        return self.family != "PerImage"

    def __str__(self) -> str:
        if self.family == "PerImage":
            return "PerImage"
        return f"{self.family}{self.k:02d}"

    @classmethod
    def parse(cls, text: str) -> "MetricId":
        if text.lower() in ("perimage", "per_image", "per-image"):
            return cls("PerImage")
        fam, num = text[:1].upper(), text[1:]
        if fam in FAMILIES and num.isdigit():
            return cls(fam, int(num))
        raise ValueError(f"unknown metric {text!r}")


PER_IMAGE = MetricId("PerImage")

#: Canonical enumeration order: S before H before A, ascending k, PerImage last.
ALL_METRICS: Tuple[MetricId, ...] = tuple(
    MetricId(fam, k) for fam in FAMILIES for k in TRUNCATION_LEVELS
) + (PER_IMAGE,)

FUSION_METRICS: Tuple[MetricId, ...] = ALL_METRICS[:-1]


# Validation -----------------------------------------------------------------


@dataclass(frozen=True)
class ValidationVerdict:
    """Outcome of validate_matrix; empty violation list means valid."""

    site_id: str
    violations: Tuple[str, ...] = field(default=())

    @property
    def valid(self) -> bool:
        return not self.violations


def validate_matrix(
    m: ScoreMatrix, labels: LabelSet, mode: SchemaMode = "softmax"
) -> ValidationVerdict:
    """Check every matrix invariant; collects all violations, never raises."""
    bad = []
    n = m.n_rows
    if n < 1:
        bad.append("row count 0 < 1")
    if n > MAX_IMAGES:
        bad.append(f"row count {n} > {MAX_IMAGES}")
    prev = 0
    for ordinal, vec in m.rows:
        if ordinal <= prev:
            bad.append(f"ordinal {ordinal:02d} not strictly increasing")
        prev = ordinal
        if ordinal < 1 or ordinal > MAX_IMAGES:
            bad.append(f"ordinal {ordinal} outside 1..{MAX_IMAGES}")
        if len(vec) != len(labels):
            bad.append(
                f"row {ordinal:02d} has {len(vec)} scores, expected {len(labels)}"
            )
            continue
        for c, s in enumerate(vec):
            if not (0.0 <= s <= 1.0) or not np.isfinite(s):
                bad.append(f"row {ordinal:02d} score[{c}] = {s} outside [0,1]")
        if mode == "softmax":
            total = sum(vec)
            if abs(total - 1.0) > SOFTMAX_ROW_TOL:
                bad.append(
                    f"row {ordinal:02d} sum {total:.8f} not within 1 +/- {SOFTMAX_ROW_TOL}"
                )
    return ValidationVerdict(m.site_id, tuple(bad))
