"""Dataset-level evaluation: 13-metric accuracies, confusion matrices, sweeps.

Accuracy is the ratio of correctly predicted sites to evaluated sites (for
PerImage: correctly predicted images to total images).  Sites without a
usable score matrix are skipped with a reason and excluded from denominators.
"""

from __future__ import annotations

import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from . import ingest
from .aggregate import _argmax_low, fuse
from .model import (
    ALL_METRICS,
    FUSION_METRICS,
    PER_IMAGE,
    LabelSet,
    MetricId,
    ScoreMatrix,
    WebSiteRecord,
)


class EvaluationError(ValueError):
    pass


@dataclass(frozen=True)
class EvaluationSet:
    """Test-split sites paired with their score matrices, plus a skip register."""

    labels: LabelSet
    sites: Tuple[Tuple[WebSiteRecord, ScoreMatrix], ...]
    skipped: Tuple[Tuple[str, str], ...] = ()  # (site_id, reason)


def build_evaluation_set(
    manifest: ingest.DatasetManifest,
    load_report: ingest.ScoreLoadReport,
    split: str = "test",
) -> EvaluationSet:
    sites = []
    skipped = []
    for record in manifest.by_split(split):
        m = load_report.matrices.get(record.site_id)
        if m is None:
            if record.site_id in load_report.invalid:
                verdict = load_report.invalid[record.site_id]
                skipped.append((record.site_id, f"invalid: {verdict.violations[0]}"))
            else:
                skipped.append((record.site_id, "no score matrix"))
            continue
        if m.n_rows == 0:
            skipped.append((record.site_id, "no evidence"))
            continue
        sites.append((record, m))
    return EvaluationSet(manifest.labels, tuple(sites), tuple(skipped))


@dataclass
class EvaluationReport:
    labels: LabelSet
    accuracy_by_metric: Dict[MetricId, float]
    confusion: Dict[MetricId, np.ndarray]  # confusion[m][true, predicted]
    skipped: Tuple[Tuple[str, str], ...]
    n_sites: int
    per_image_count: int

    def to_json(self) -> str:
        doc = {
            "labels": list(self.labels.names),
            "n_sites": self.n_sites,
            "per_image_count": self.per_image_count,
            "skipped": [list(s) for s in self.skipped],
            "metrics": {
                str(m): {
                    "accuracy": self.accuracy_by_metric[m],
                    "confusion": self.confusion[m].tolist(),
                }
                for m in ALL_METRICS
            },
        }
        return json.dumps(doc, indent=2) + "\n"

    @classmethod
    def from_json(cls, text: str) -> "EvaluationReport":
        doc = json.loads(text)
        labels = LabelSet.from_names(doc["labels"])
        acc, conf = {}, {}
        for name, entry in doc["metrics"].items():
            m = MetricId.parse(name)
            acc[m] = entry["accuracy"]
            conf[m] = np.array(entry["confusion"], dtype=np.int64)
        return cls(
            labels=labels,
            accuracy_by_metric=acc,
            confusion=conf,
            skipped=tuple((s[0], s[1]) for s in doc["skipped"]),
            n_sites=doc["n_sites"],
            per_image_count=doc["per_image_count"],
        )


def _site_predictions(args) -> Tuple[str, int, Dict[MetricId, int], List[int]]:
    record, matrix, labels = args
    preds = {m: fuse(matrix, m, labels).decided.index for m in FUSION_METRICS}
    image_preds = [_argmax_low(vec) for _, vec in matrix.rows]
    return record.site_id, record.label.index, preds, image_preds


def evaluate(ev_set: EvaluationSet, workers: int = 1) -> EvaluationReport:
    """Compute all 13 metrics over an evaluation set.

    The per-site map may run in parallel; the reduction is a fixed
    site_id-sorted order, so any worker count gives a bit-identical report.
    """
    if not ev_set.sites:
        raise EvaluationError("empty evaluation set")
    C = len(ev_set.labels)
    jobs = [(r, m, ev_set.labels) for r, m in ev_set.sites]
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_site_predictions, jobs))
    else:
        results = [_site_predictions(j) for j in jobs]
    results.sort(key=lambda item: item[0])

    confusion = {m: np.zeros((C, C), dtype=np.int64) for m in ALL_METRICS}
    for _, true_c, preds, image_preds in results:
        for m in FUSION_METRICS:
            confusion[m][true_c, preds[m]] += 1
        for p in image_preds:
            confusion[PER_IMAGE][true_c, p] += 1

    accuracy = {
        m: float(np.trace(confusion[m]) / confusion[m].sum()) for m in ALL_METRICS
    }
    return EvaluationReport(
        labels=ev_set.labels,
        accuracy_by_metric=accuracy,
        confusion=confusion,
        skipped=ev_set.skipped,
        n_sites=len(ev_set.sites),
        per_image_count=int(confusion[PER_IMAGE].sum()),
    )


def best_metric(report: EvaluationReport) -> Tuple[MetricId, float]:
    """Highest-accuracy metric; ties resolve to the canonical metric order."""
    best = ALL_METRICS[0]
    for m in ALL_METRICS[1:]:
        if report.accuracy_by_metric[m] > report.accuracy_by_metric[best]:
            best = m
    return best, report.accuracy_by_metric[best]


# Checkpoint sweeps ----------------------------------------------------------


@dataclass(frozen=True)
class CheckpointSeries:
    points: Tuple[Tuple[int, EvaluationReport], ...]
    failed: Tuple[Tuple[int, str], ...] = ()


def sweep(
    snapshots: Sequence[Tuple[int, Path]],
    manifest: ingest.DatasetManifest,
    mode: str = "softmax",
    split: str = "test",
    workers: int = 1,
) -> CheckpointSeries:
    """Evaluate one score-matrix directory per checkpoint epoch.

    A snapshot that fails to parse or evaluate becomes a failed point; the
    sweep continues.
    """
    points = []
    failed = []
    last_epoch = None
    for epoch, directory in snapshots:
        if last_epoch is not None and epoch <= last_epoch:
            raise EvaluationError(f"epochs must be strictly increasing, got {epoch}")
        last_epoch = epoch
        try:
            load = ingest.load_scores(directory, manifest, mode=mode, split=split)
            report = evaluate(build_evaluation_set(manifest, load, split), workers)
        except (ingest.IngestError, EvaluationError, OSError) as exc:
            failed.append((epoch, str(exc)))
            continue
        points.append((epoch, report))
    return CheckpointSeries(tuple(points), tuple(failed))


def discover_snapshots(root: Path) -> List[Tuple[int, Path]]:
    """Find ``epoch_NNN`` score directories under a sweep root, epoch order."""
    found = []
    for path in Path(root).iterdir():
        if path.is_dir() and path.name.startswith("epoch_"):
            suffix = path.name[len("epoch_"):]
            if suffix.isdigit():
                found.append((int(suffix), path))
    return sorted(found)


# Rendering ------------------------------------------------------------------


def _pct(a: float) -> str:
    return f"{100.0 * a:.2f}%"


def render_report(
    report: EvaluationReport,
    format: str = "table",
    baselines: Optional[Dict[str, Dict[str, float]]] = None,
) -> str:
    """Render one report as a human table, CSV, or JSON.

    ``baselines`` maps column name -> {metric name -> accuracy} for
    externally supplied comparison numbers; absent cells render as "-".
    """
    if format == "json":
        return report.to_json()
    if format == "csv":
        lines = ["metric,accuracy"]
        lines += [f"{m},{report.accuracy_by_metric[m]!r}" for m in ALL_METRICS]
        return "\n".join(lines) + "\n"
    if format == "table":
        base_cols = list(baselines) if baselines else []
        header = ["Metric", "Accuracy"] + base_cols
        rows = []
        for m in ALL_METRICS:
            row = [str(m), _pct(report.accuracy_by_metric[m])]
            for col in base_cols:
                v = baselines[col].get(str(m))
                row.append(_pct(v) if v is not None else "-")
            rows.append(row)
        widths = [max(len(h), *(len(r[i]) for r in rows)) for i, h in enumerate(header)]
        fmt = "  ".join(f"{{:<{w}}}" for w in widths)
        out = [fmt.format(*header), fmt.format(*("-" * w for w in widths))]
        out += [fmt.format(*r) for r in rows]
        b, acc = best_metric(report)
        out.append("")
        out.append(f"best: {b} at {_pct(acc)} over {report.n_sites} sites")
        if report.skipped:
            out.append(f"skipped: {len(report.skipped)} site(s)")
        return "\n".join(out) + "\n"
    raise EvaluationError(f"unknown report format {format!r}")


def render_series(series: CheckpointSeries, format: str = "plot-series") -> str:
    """Render a checkpoint sweep.

    ``plot-series`` is a long-form CSV (epoch, metric, accuracy); ``table``
    shows the best-over-series and last-point accuracy per metric.
    """
    if format == "plot-series":
        lines = ["epoch,metric,accuracy"]
        for epoch, report in series.points:
            for m in ALL_METRICS:
                lines.append(f"{epoch},{m},{report.accuracy_by_metric[m]!r}")
        return "\n".join(lines) + "\n"
    if format == "json":
        doc = {
            "points": [
                {"epoch": e, "report": json.loads(r.to_json())}
                for e, r in series.points
            ],
            "failed": [list(f) for f in series.failed],
        }
        return json.dumps(doc, indent=2) + "\n"
    if format == "table":
        if not series.points:
            return "no successful checkpoints\n"
        last_epoch, last = series.points[-1]
        header = ["Metric", "Best", "BestEpoch", f"Last(ep{last_epoch})"]
        rows = []
        for m in ALL_METRICS:
            best_e, best_a = max(
                ((e, r.accuracy_by_metric[m]) for e, r in series.points),
                key=lambda p: (p[1], -p[0]),
            )
            rows.append([str(m), _pct(best_a), str(best_e), _pct(last.accuracy_by_metric[m])])
        widths = [max(len(h), *(len(r[i]) for r in rows)) for i, h in enumerate(header)]
        fmt = "  ".join(f"{{:<{w}}}" for w in widths)
        out = [fmt.format(*header), fmt.format(*("-" * w for w in widths))]
        out += [fmt.format(*r) for r in rows]
        if series.failed:
            out.append("")
            out += [f"failed epoch {e}: {why}" for e, why in series.failed]
        return "\n".join(out) + "\n"
    raise EvaluationError(f"unknown series format {format!r}")
