"""Planted synthetic dataset generation for acceptance and smoke testing.

``generate`` writes a manifest plus placeholder descriptive-image trees; the
stub scorer then plants each image's argmax at the site's true class with
probability p.  Everything is a pure function of the parameters, so two runs
with the same arguments produce identical trees.
"""

from __future__ import annotations

import io
import json
from dataclasses import dataclass
from pathlib import Path

from PIL import Image

from .ingest import DatasetManifest, write_manifest
from .ioutil import atomic_write_bytes, atomic_write_text
from .model import LabelSet, WebSiteRecord


@dataclass(frozen=True)
class SynthConfig:
    sites: int = 12
    classes: int = 4
    images_per_site: int = 20
    correct_rate: float = 0.7
    seed: int = 0


def _placeholder_jpeg() -> bytes:
    buf = io.BytesIO()
    Image.new("L", (8, 8), color=128).save(buf, format="JPEG", quality=75)
    return buf.getvalue()


def class_names(n: int) -> list:
    width = len(str(n - 1))
    return [f"class_{i:0{width}d}" for i in range(n)]


def generate(out_root: Path, cfg: SynthConfig) -> DatasetManifest:
    """Write manifest.json/csv, images/<site>/NN.jpg trees, and stub params."""
    out_root = Path(out_root)
    labels = LabelSet.from_names(class_names(cfg.classes))
    width = len(str(cfg.sites - 1))
    records = []
    jpeg = _placeholder_jpeg()
    for i in range(cfg.sites):
        sid = f"site_{i:0{width}d}"
        label = labels[i % cfg.classes]
        records.append(
            WebSiteRecord(
                site_id=sid,
                url=f"http://example.test/{sid}",
                label=label,
                split="test",
            )
        )
        site_dir = out_root / "images" / sid
        for o in range(1, cfg.images_per_site + 1):
            atomic_write_bytes(site_dir / f"{o:02d}.jpg", jpeg)
    manifest = DatasetManifest("synthetic", labels, tuple(records))
    write_manifest(manifest, out_root / "manifest.json")
    write_manifest(manifest, out_root / "manifest.csv")
    atomic_write_text(
        out_root / "stub_params.json",
        json.dumps(
            {"seed": cfg.seed, "correct_rate": cfg.correct_rate}, indent=2
        )
        + "\n",
    )
    return manifest
