"""Score export: run a snapshot over the test split, emit score documents.

One JSON file per site in the evaluation toolkit's interchange format:
``{"site_id", "labels", "mode": "softmax", "rows": [{"ordinal", "scores"}]}``.
The files are written directly (temp + rename); no code is shared with the
consumer, only the format.
"""

from __future__ import annotations

import json
import logging
import os
import tempfile
from dataclasses import dataclass, field
from pathlib import Path
from typing import List, Tuple

import torch

from .data import Manifest, load_image, read_manifest, site_images
from .train import TrainerError, build_model

log = logging.getLogger(__name__)


@dataclass
class ExportSummary:
    sites_exported: int = 0
    rows_written: int = 0
    skipped_images: List[str] = field(default_factory=list)


def load_snapshot(snapshot_dir: Path):
    """Returns (model in eval mode, label names, input_size)."""
    path = Path(snapshot_dir) / "model.pt"
    if not path.is_file():
        raise TrainerError(f"{snapshot_dir}: no model.pt")
    doc = torch.load(path, map_location="cpu", weights_only=True)
    labels = tuple(doc["labels"])
    model = build_model(doc["architecture"], len(labels), pretrained=False)
    model.load_state_dict(doc["state_dict"])
    model.eval()
    return model, labels, int(doc["input_size"])


def _atomic_write_text(path: Path, text: str) -> None:
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _score_site(model, site_id: str, images_root: Path, input_size: int,
                summary: ExportSummary) -> List[Tuple[int, List[float]]]:
    rows = []
    for ordinal, path in site_images(images_root, site_id):
        try:
            tensor = load_image(path, input_size)
        except Exception as exc:
            log.warning("skipping unreadable image %s: %s", path, exc)
            summary.skipped_images.append(f"{site_id}/{path.name}")
            continue
        with torch.no_grad():
            probs = torch.softmax(model(tensor.unsqueeze(0))[0], dim=0)
        rows.append((ordinal, [float(v) for v in probs]))
    return rows


def export_scores(snapshot_dir: Path, manifest_path: Path, images_root: Path,
                  out_dir: Path, split: str = "test") -> ExportSummary:
    """Write one score document per site of the chosen split."""
    model, labels, input_size = load_snapshot(snapshot_dir)
    manifest = read_manifest(manifest_path)
    if tuple(manifest.labels) != labels:
        raise TrainerError(
            f"manifest labels {manifest.labels} do not match snapshot labels {labels}"
        )
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    summary = ExportSummary()
    for site in manifest.split(split):
        rows = _score_site(model, site.site_id, Path(images_root), input_size, summary)
        if not rows:
            log.warning("site %s has no readable images; no file written", site.site_id)
            continue
        doc = {
            "site_id": site.site_id,
            "labels": list(labels),
            "mode": "softmax",
            "rows": [{"ordinal": o, "scores": v} for o, v in rows],
        }
        _atomic_write_text(out_dir / f"{site.site_id}.json",
                           json.dumps(doc, indent=1) + "\n")
        summary.sites_exported += 1
        summary.rows_written += len(rows)
    return summary
