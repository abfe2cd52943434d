"""Dataset access via the interchange file formats.

Reads the manifest CSV/JSON and the ``<root>/<site_id>/NN.jpg`` image layout
directly; this package deliberately shares no code with the evaluation
toolkit, only its on-disk formats.
"""

from __future__ import annotations

import csv
import json
import re
from dataclasses import dataclass
from pathlib import Path
from typing import List, Optional, Tuple

import torch
from PIL import Image
from torch.utils.data import Dataset

IMAGE_NAME_RE = re.compile(r"^(\d{2})\.jpg$")


class DataError(ValueError):
    pass


@dataclass(frozen=True)
class SiteEntry:
    site_id: str
    label: str
    split: str


@dataclass(frozen=True)
class Manifest:
    labels: Tuple[str, ...]  # canonical column order
    sites: Tuple[SiteEntry, ...]

    def split(self, name: str) -> Tuple[SiteEntry, ...]:
        return tuple(s for s in self.sites if s.split == name)

    def label_index(self, name: str) -> int:
        return self.labels.index(name)


def read_manifest(path: Path) -> Manifest:
    path = Path(path)
    if path.suffix.lower() == ".json":
        doc = json.loads(path.read_text(encoding="utf-8"))
        labels = tuple(doc["labels"])
        sites = tuple(
            SiteEntry(r["site_id"], r["label"], r["split"]) for r in doc["records"]
        )
    else:
        with open(path, newline="", encoding="utf-8") as fh:
            rows = list(csv.DictReader(fh))
        if not rows:
            raise DataError(f"{path}: no records")
        labels = tuple(sorted({r["label"] for r in rows}))
        sites = tuple(SiteEntry(r["site_id"], r["label"], r["split"]) for r in rows)
    for s in sites:
        if s.label not in labels:
            raise DataError(f"{path}: unknown label {s.label!r} for {s.site_id}")
    return Manifest(labels, sites)


def site_images(images_root: Path, site_id: str) -> List[Tuple[int, Path]]:
    """Present (ordinal, path) pairs for one site, ordinal order, max 20."""
    site_dir = Path(images_root) / site_id
    found = []
    if site_dir.is_dir():
        for p in site_dir.iterdir():
            m = IMAGE_NAME_RE.match(p.name)
            if m:
                found.append((int(m.group(1)), p))
    return sorted(found)[:20]


def load_image(path: Path, input_size: int) -> torch.Tensor:
    """Decode, resize to the square model input, scale to [0, 1] CHW."""
    with Image.open(path) as img:
        img = img.convert("RGB").resize((input_size, input_size))
        import numpy as np

        arr = np.asarray(img, dtype="float32") / 255.0
    return torch.from_numpy(arr).permute(2, 0, 1)


class ImageFolderDataset(Dataset):
    """All (image, class index) pairs of one split."""

    def __init__(self, manifest: Manifest, images_root: Path, split: str, input_size: int):
        self.items: List[Tuple[Path, int]] = []
        for site in manifest.split(split):
            idx = manifest.label_index(site.label)
            for _, path in site_images(images_root, site.site_id):
                self.items.append((path, idx))
        self.input_size = input_size

    def __len__(self) -> int:
        return len(self.items)

    def __getitem__(self, i: int):
        path, label = self.items[i]
        return load_image(path, self.input_size), label
