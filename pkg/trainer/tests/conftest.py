"""Shared fixture: a tiny color-coded dataset written to a temp directory.

Each class gets a distinct solid color so even the small test CNN has signal.
Train split: 8 sites x 5 images = 40 images; test split: 4 sites x 3 images;
validation split: 2 sites x 2 images.
"""

import csv
from pathlib import Path

import pytest
from PIL import Image

try:
    import descimg_trainer  # noqa: F401
except ImportError:  # trainer package (and torch) not installed: skip this tree
    collect_ignore_glob = ["*"]

CLASSES = ("machinery", "music", "sport", "tourism")
COLORS = {
    "machinery": (220, 40, 40),
    "music": (40, 220, 40),
    "sport": (40, 40, 220),
    "tourism": (220, 220, 40),
}


def _write_site(images_root: Path, site_id: str, label: str, n_images: int) -> None:
    site_dir = images_root / site_id
    site_dir.mkdir(parents=True)
    for ordinal in range(1, n_images + 1):
        # slight per-image brightness jitter, still deterministic
        r, g, b = COLORS[label]
        shade = (ordinal * 7) % 30
        img = Image.new("RGB", (64, 48), (max(r - shade, 0), g, b))
        img.save(site_dir / f"{ordinal:02d}.jpg", quality=90)


@pytest.fixture(scope="session")
def fixture_dataset(tmp_path_factory):
    root = tmp_path_factory.mktemp("dataset")
    images_root = root / "images"
    rows = []
    site_n = 0
    for split, per_class, n_images in (("train", 2, 5), ("test", 1, 3),
                                       ("validation", 1, 2)):
        for label in CLASSES:
            for _ in range(per_class if split == "train" else 1):
                if split == "validation" and label in CLASSES[2:]:
                    continue
                site_id = f"site_{site_n:02d}"
                site_n += 1
                _write_site(images_root, site_id, label, n_images)
                rows.append((site_id, label, split))

    manifest = root / "manifest.csv"
    with open(manifest, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["site_id", "url", "label", "split",
                        "language", "screenshot_path", "text_path"])
        for site_id, label, split in rows:
            writer.writerow([site_id, f"http://{site_id}.test", label, split, "", "", ""])
    return {"root": root, "manifest": manifest, "images": images_root}
