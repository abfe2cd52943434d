"""Score-matrix producers: deterministic stub, precomputed loader, external adapter.

The stub stands in for a trained image model.  It derives every row from a
keyed hash of (seed, site_id, ordinal), so fixtures are stable across runs
and machines, and it plants the site's true class as the row argmax with a
configurable per-image correct rate.

The external adapter is a subprocess speaking JSON on stdin/stdout:
request ``{"site_id": ..., "image_paths": [...], "labels": [...]}``,
response a score document (see ingest).  Exit code 0 on success.
"""

from __future__ import annotations

import hashlib
import json
import subprocess
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

from . import ingest
from .model import (
    ClassLabel,
    LabelSet,
    ScoreMatrix,
    SchemaMode,
    validate_matrix,
)


class ScorerError(RuntimeError):
    pass


@dataclass(frozen=True)
class StubSpec:
    """Hash-seeded synthetic scorer with a planted per-image correct rate."""

    seed: int = 0
    correct_rate: float = 0.7
    concentration: float = 1.0  # Dirichlet alpha for row shapes

    kind = "stub"


@dataclass(frozen=True)
class PrecomputedSpec:
    """Pass-through loader for existing score documents."""

    directory: Path

    kind = "precomputed"


@dataclass(frozen=True)
class ExternalSpec:
    """Subprocess adapter; one request per site or per image."""

    command: Tuple[str, ...]
    per_image: bool = False

    kind = "external"


ScorerSpec = Union[StubSpec, PrecomputedSpec, ExternalSpec]


def list_image_ordinals(image_dir: Path) -> List[Tuple[int, Path]]:
    """Present (ordinal, path) pairs under one site directory, ordinal order."""
    image_dir = Path(image_dir)
    found = []
    if image_dir.is_dir():
        for path in image_dir.iterdir():
            match = ingest.IMAGE_NAME_RE.match(path.name)
            if match:
                found.append((int(match.group(1)), path))
    return sorted(found)


def _stub_row(
    seed: int, site_id: str, ordinal: int, true_index: int, C: int,
    correct_rate: float, concentration: float,
) -> np.ndarray:
    key = f"{seed}:{site_id}:{ordinal:02d}".encode()
    digest = hashlib.blake2b(key, digest_size=16).digest()
    rng = np.random.default_rng(int.from_bytes(digest, "big"))
    draw = np.sort(rng.dirichlet(np.full(C, concentration)))[::-1]
    row = np.empty(C)
    if rng.random() < correct_rate:
        row[true_index] = draw[0]
        rest = [c for c in range(C) if c != true_index]
        rng.shuffle(rest)
        row[rest] = draw[1:]
    else:
        # a wrong winner still leaves the runner-up share on the true class,
        # like a real classifier's confusions
        others = [c for c in range(C) if c != true_index]
        winner = others[rng.integers(len(others))]
        row[winner] = draw[0]
        row[true_index] = draw[1]
        rest = [c for c in range(C) if c not in (winner, true_index)]
        rng.shuffle(rest)
        row[rest] = draw[2:]
    return row


def score_site(
    site_id: str,
    image_dir: Path,
    spec: ScorerSpec,
    labels: LabelSet,
    true_label: Optional[ClassLabel] = None,
    mode: SchemaMode = "softmax",
) -> ScoreMatrix:
    """Produce one softmax-valid score matrix for a site.

    The stub needs ``true_label`` to plant its bias; precomputed and external
    scorers ignore it.
    """
    if isinstance(spec, PrecomputedSpec):
        path = Path(spec.directory) / f"{site_id}.json"
        if not path.is_file():
            raise ScorerError(f"{site_id}: no precomputed score file at {path}")
        m, _, _ = ingest.parse_score_document(path)
        return m

    images = list_image_ordinals(image_dir)
    if not images:
        raise ScorerError(f"{site_id}: no evidence (no images in {image_dir})")

    if isinstance(spec, StubSpec):
        if true_label is None:
            raise ScorerError("stub scorer needs the site's true label")
        rows = [
            (
                o,
                _stub_row(
                    spec.seed, site_id, o, true_label.index, len(labels),
                    spec.correct_rate, spec.concentration,
                ),
            )
            for o, _ in images
        ]
        return ScoreMatrix.from_rows(site_id, rows)

    if isinstance(spec, ExternalSpec):
        if spec.per_image:
            rows = []
            for o, path in images:
                doc = _run_adapter(spec.command, site_id, [str(path)], labels)
                if len(doc["rows"]) != 1:
                    raise ScorerError(
                        f"{site_id}: per-image adapter returned {len(doc['rows'])} rows"
                    )
                rows.append((o, doc["rows"][0]["scores"]))
            m = ScoreMatrix.from_rows(site_id, rows)
        else:
            doc = _run_adapter(
                spec.command, site_id, [str(p) for _, p in images], labels
            )
            m = ScoreMatrix.from_rows(
                site_id, [(r["ordinal"], r["scores"]) for r in doc["rows"]]
            )
        verdict = validate_matrix(m, labels, mode)
        if not verdict.valid:
            raise ScorerError(
                f"{site_id}: adapter output invalid: {verdict.violations[0]}"
            )
        return m

    raise ScorerError(f"unknown scorer spec {spec!r}")


def _run_adapter(
    command: Sequence[str], site_id: str, image_paths: List[str], labels: LabelSet
) -> dict:
    request = json.dumps(
        {"site_id": site_id, "image_paths": image_paths, "labels": list(labels.names)}
    )
    try:
        proc = subprocess.run(
            list(command), input=request.encode(), capture_output=True, timeout=300
        )
    except (OSError, subprocess.TimeoutExpired) as exc:
        raise ScorerError(f"{site_id}: adapter failed to run: {exc}") from exc
    if proc.returncode != 0:
        raise ScorerError(
            f"{site_id}: adapter exit {proc.returncode}: {proc.stderr.decode(errors='replace')[:200]}"
        )
    try:
        doc = json.loads(proc.stdout.decode())
        doc["rows"]
    except (ValueError, KeyError) as exc:
        raise ScorerError(f"{site_id}: malformed adapter output: {exc}") from exc
    return doc


@dataclass
class ScoreSummary:
    sites_scored: int = 0
    images_scored: int = 0
    failures: Dict[str, str] = field(default_factory=dict)


def score_dataset(
    manifest: ingest.DatasetManifest,
    images_root: Path,
    spec: ScorerSpec,
    out_dir: Path,
    mode: SchemaMode = "softmax",
    split: Optional[str] = None,
) -> ScoreSummary:
    """Write one score document per site; per-site failures are collected."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    summary = ScoreSummary()
    records = manifest.records if split is None else manifest.by_split(split)
    for record in records:
        try:
            m = score_site(
                record.site_id,
                Path(images_root) / record.site_id,
                spec,
                manifest.labels,
                true_label=record.label,
                mode=mode,
            )
        except ScorerError as exc:
            summary.failures[record.site_id] = str(exc)
            continue
        ingest.write_score_document(
            m, manifest.labels, mode, out_dir / f"{record.site_id}.json"
        )
        summary.sites_scored += 1
        summary.images_scored += m.n_rows
    return summary
