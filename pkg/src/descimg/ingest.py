"""Manifest and score-matrix serialization, image-set scanning, dataset stats.

File formats
------------
Manifest CSV: header ``site_id,url,label,split,language,screenshot_path,text_path``
(UTF-8; empty cells mean "absent").  Manifest JSON additionally carries the
dataset name and the canonical label order.

Score document (JSON, one per site)::

    {"site_id": "...", "labels": ["...", ...], "mode": "softmax",
     "rows": [{"ordinal": 1, "scores": [0.1, ...]}, ...]}

The equivalent long-form CSV has columns ``site_id,ordinal,score_1..score_C``.
Floats are emitted with ``repr`` (shortest round-trip form), so write-then-parse
is exact.

Image layout: ``<root>/<site_id>/01.jpg`` ... ``20.jpg``, exactly two digits.
"""

from __future__ import annotations

import csv
import json
import re
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

from PIL import Image

from .ioutil import atomic_write_text
from .model import (
    LabelSet,
    ScoreMatrix,
    SchemaMode,
    ValidationVerdict,
    WebSiteRecord,
    validate_matrix,
)

MANIFEST_COLUMNS = (
    "site_id",
    "url",
    "label",
    "split",
    "language",
    "screenshot_path",
    "text_path",
)

IMAGE_NAME_RE = re.compile(r"^(\d{2})\.jpg$")


class IngestError(ValueError):
    """Malformed manifest or score file."""


@dataclass(frozen=True)
class DatasetManifest:
    name: str
    labels: LabelSet
    records: Tuple[WebSiteRecord, ...]

    @property
    def split_counts(self) -> Dict[str, int]:
        return dict(Counter(r.split for r in self.records))

    def by_split(self, split: str) -> Tuple[WebSiteRecord, ...]:
        return tuple(r for r in self.records if r.split == split)

    def record(self, site_id: str) -> WebSiteRecord:
        for r in self.records:
            if r.site_id == site_id:
                return r
        raise KeyError(f"unknown site {site_id!r}")


def _build_manifest(
    name: str,
    raw_rows: Sequence[dict],
    labels: Optional[LabelSet],
    source: str,
) -> DatasetManifest:
    if not raw_rows:
        raise IngestError(f"{source}: no records")
    if labels is None:
        names = sorted({row.get("label") or "" for row in raw_rows})
        try:
            labels = LabelSet.from_names(names)
        except ValueError as exc:
            raise IngestError(f"{source}: cannot infer labels: {exc}") from exc
    records = []
    seen = set()
    for i, row in enumerate(raw_rows, start=1):
        sid = row.get("site_id") or ""
        if not sid:
            raise IngestError(f"{source}: row {i}: missing site_id")
        if sid in seen:
            raise IngestError(f"{source}: row {i}: duplicate site_id {sid!r}")
        seen.add(sid)
        try:
            label = labels.by_name(row.get("label") or "")
        except KeyError:
            raise IngestError(
                f"{source}: row {i}: unknown label {row.get('label')!r}"
            ) from None
        split = row.get("split") or ""
        if split not in ("train", "validation", "test"):
            raise IngestError(f"{source}: row {i}: bad split {split!r}")
        records.append(
            WebSiteRecord(
                site_id=sid,
                url=row.get("url") or "",
                label=label,
                split=split,
                language=row.get("language") or None,
                screenshot_path=row.get("screenshot_path") or None,
                text_path=row.get("text_path") or None,
            )
        )
    return DatasetManifest(name, labels, tuple(records))


def parse_manifest(
    path: Path,
    format: Optional[str] = None,
    labels: Optional[LabelSet] = None,
) -> DatasetManifest:
    """Parse a CSV or JSON manifest.

    CSV carries no label-order metadata, so pass ``labels`` to fix the
    canonical column order; otherwise labels are the sorted unique names.
    """
    path = Path(path)
    if format is None:
        format = "json" if path.suffix.lower() == ".json" else "csv"
    if format == "json":
        doc = json.loads(path.read_text(encoding="utf-8"))
        doc_labels = LabelSet.from_names(doc["labels"])
        return _build_manifest(doc.get("name", path.stem), doc["records"], doc_labels, str(path))
    if format == "csv":
        with open(path, newline="", encoding="utf-8") as fh:
            reader = csv.DictReader(fh)
            if reader.fieldnames is None or "site_id" not in reader.fieldnames:
                raise IngestError(f"{path}: missing header row")
            rows = list(reader)
        return _build_manifest(path.stem, rows, labels, str(path))
    raise IngestError(f"unknown manifest format {format!r}")


def write_manifest(manifest: DatasetManifest, path: Path, format: Optional[str] = None) -> None:
    path = Path(path)
    if format is None:
        format = "json" if path.suffix.lower() == ".json" else "csv"
    if format == "json":
        doc = {
            "name": manifest.name,
            "labels": list(manifest.labels.names),
            "records": [
                {
                    "site_id": r.site_id,
                    "url": r.url,
                    "label": r.label.name,
                    "split": r.split,
                    "language": r.language,
                    "screenshot_path": r.screenshot_path,
                    "text_path": r.text_path,
                }
                for r in manifest.records
            ],
        }
        atomic_write_text(path, json.dumps(doc, indent=2) + "\n")
        return
    if format == "csv":
        lines = [",".join(MANIFEST_COLUMNS)]
        for r in manifest.records:
            cells = [
                r.site_id,
                r.url,
                r.label.name,
                r.split,
                r.language or "",
                r.screenshot_path or "",
                r.text_path or "",
            ]
            lines.append(",".join(cells))
        atomic_write_text(path, "\n".join(lines) + "\n")
        return
    raise IngestError(f"unknown manifest format {format!r}")


# Score documents ------------------------------------------------------------


def score_document(m: ScoreMatrix, labels: LabelSet, mode: SchemaMode) -> dict:
    return {
        "site_id": m.site_id,
        "labels": list(labels.names),
        "mode": mode,
        "rows": [{"ordinal": o, "scores": list(v)} for o, v in m.rows],
    }


def write_score_document(
    m: ScoreMatrix, labels: LabelSet, mode: SchemaMode, path: Path
) -> None:
    atomic_write_text(Path(path), json.dumps(score_document(m, labels, mode), indent=1) + "\n")


def parse_score_document(path: Path) -> Tuple[ScoreMatrix, List[str], str]:
    """Returns (matrix, label names, mode) from one JSON score document."""
    try:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
        m = ScoreMatrix.from_rows(
            doc["site_id"], [(r["ordinal"], r["scores"]) for r in doc["rows"]]
        )
        return m, list(doc["labels"]), doc.get("mode", "softmax")
    except (KeyError, TypeError, json.JSONDecodeError) as exc:
        raise IngestError(f"{path}: malformed score document: {exc}") from exc


def write_scores_csv(
    matrices: Sequence[ScoreMatrix], labels: LabelSet, path: Path
) -> None:
    """Long-form CSV: one line per (site, image) row."""
    header = ["site_id", "ordinal"] + [f"score_{c + 1}" for c in range(len(labels))]
    lines = [",".join(header)]
    for m in matrices:
        for o, vec in m.rows:
            lines.append(",".join([m.site_id, str(o)] + [repr(s) for s in vec]))
    atomic_write_text(Path(path), "\n".join(lines) + "\n")


def parse_scores_csv(path: Path, n_classes: int) -> Dict[str, ScoreMatrix]:
    by_site: Dict[str, list] = {}
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or header[:2] != ["site_id", "ordinal"]:
            raise IngestError(f"{path}: missing score CSV header")
        for i, cells in enumerate(reader, start=2):
            if len(cells) != 2 + n_classes:
                raise IngestError(f"{path}: line {i}: expected {2 + n_classes} cells")
            by_site.setdefault(cells[0], []).append(
                (int(cells[1]), [float(x) for x in cells[2:]])
            )
    return {
        sid: ScoreMatrix.from_rows(sid, sorted(rows))
        for sid, rows in by_site.items()
    }


@dataclass
class ScoreLoadReport:
    matrices: Dict[str, ScoreMatrix]
    invalid: Dict[str, ValidationVerdict] = field(default_factory=dict)
    unknown_sites: List[str] = field(default_factory=list)
    missing_sites: List[str] = field(default_factory=list)


def load_scores(
    scores_dir: Path,
    manifest: DatasetManifest,
    mode: SchemaMode = "softmax",
    split: Optional[str] = None,
) -> ScoreLoadReport:
    """Load every ``*.json`` score document under a directory.

    Files for unknown site_ids and matrices failing validation are reported,
    not fatal; manifest sites with no file land in ``missing_sites``.
    """
    scores_dir = Path(scores_dir)
    if not scores_dir.is_dir():
        raise IngestError(f"{scores_dir}: not a directory")
    wanted = {r.site_id for r in manifest.records if split is None or r.split == split}
    report = ScoreLoadReport(matrices={})
    for path in sorted(scores_dir.glob("*.json")):
        m, _, _ = parse_score_document(path)
        if m.site_id not in wanted:
            report.unknown_sites.append(m.site_id)
            continue
        verdict = validate_matrix(m, manifest.labels, mode)
        if verdict.valid:
            report.matrices[m.site_id] = m
        else:
            report.invalid[m.site_id] = verdict
    report.missing_sites = sorted(wanted - set(report.matrices) - set(report.invalid))
    return report


# Image-set statistics -------------------------------------------------------


@dataclass(frozen=True)
class ImageSetStats:
    """Header-only scan of a descriptive-image tree.

    The width-height ratio is binned as ``100 * width / height`` into bins of
    ``bin_width`` percentage points; the last bin is open-ended at
    ``overflow_base``.  ``min_dim_gt_224_count`` counts images whose width and
    height are both strictly greater than 224.
    """

    total_images: int
    bin_width: int
    overflow_base: int
    wh_ratio_histogram: Tuple[Tuple[int, int], ...]  # (bin base percent, count)
    min_dim_gt_224_count: int
    per_site_image_counts: Dict[str, int]
    corrupt: Tuple[str, ...]


def scan_image_sets(
    root: Path,
    manifest: DatasetManifest,
    bin_width: int = 10,
    overflow_base: int = 300,
) -> ImageSetStats:
    """Collect dimension stats over ``<root>/<site_id>/NN.jpg`` trees.

    Only image headers are read; pixel data is never decoded.
    """
    root = Path(root)
    counts = {b: 0 for b in range(0, overflow_base + 1, bin_width)}
    per_site: Dict[str, int] = {}
    corrupt: List[str] = []
    total = 0
    big = 0
    for record in manifest.records:
        site_dir = root / record.site_id
        n = 0
        if site_dir.is_dir():
            for path in sorted(site_dir.iterdir()):
                if not IMAGE_NAME_RE.match(path.name):
                    continue
                n += 1
                try:
                    with Image.open(path) as img:
                        w, h = img.size
                except Exception:
                    corrupt.append(f"{record.site_id}/{path.name}")
                    continue
                total += 1
                ratio = 100.0 * w / h
                base = min(int(ratio // bin_width) * bin_width, overflow_base)
                counts[base] += 1
                if w > 224 and h > 224:
                    big += 1
        per_site[record.site_id] = n
    return ImageSetStats(
        total_images=total,
        bin_width=bin_width,
        overflow_base=overflow_base,
        wh_ratio_histogram=tuple(sorted(counts.items())),
        min_dim_gt_224_count=big,
        per_site_image_counts=per_site,
        corrupt=tuple(corrupt),
    )


def stats_to_json(stats: ImageSetStats) -> str:
    doc = {
        "total_images": stats.total_images,
        "bin_width": stats.bin_width,
        "overflow_base": stats.overflow_base,
        "wh_ratio_histogram": [
            {"bin_base_percent": b, "count": c} for b, c in stats.wh_ratio_histogram
        ],
        "min_dim_gt_224_count": stats.min_dim_gt_224_count,
        "per_site_image_counts": stats.per_site_image_counts,
        "corrupt": list(stats.corrupt),
    }
    return json.dumps(doc, indent=2) + "\n"


def histogram_csv(stats: ImageSetStats) -> str:
    lines = ["bin_base_percent,count"]
    lines += [f"{b},{c}" for b, c in stats.wh_ratio_histogram]
    return "\n".join(lines) + "\n"


def language_table(manifest: DatasetManifest) -> List[Tuple[str, int]]:
    """(language, count) pairs, descending by count; no language -> "unknown"."""
    counts = Counter((r.language or "unknown") for r in manifest.records)
    return sorted(counts.items(), key=lambda kv: (-kv[1], kv[0]))
