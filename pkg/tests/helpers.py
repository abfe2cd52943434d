"""Plain helpers shared across test modules (kept out of conftest so other
test trees in this repository can carry their own conftest)."""

import hashlib
import json
from pathlib import Path

import numpy as np

from descimg.model import LabelSet, ScoreMatrix

FIXTURES = Path(__file__).parent / "fixtures"

REFERENCE_LABELS = LabelSet.from_names(["machinery", "music", "sport", "tourism"])


def random_matrix(rng: np.random.Generator, n_rows=None, n_classes=None, site_id="r"):
    """Random raw-mode matrix with possibly gappy ordinals."""
    if n_rows is None:
        n_rows = int(rng.integers(1, 21))
    if n_classes is None:
        n_classes = int(rng.choice([2, 4, 7]))
    ordinals = sorted(rng.choice(np.arange(1, 21), size=n_rows, replace=False).tolist())
    rows = [(o, rng.random(n_classes).tolist()) for o in ordinals]
    return ScoreMatrix.from_rows(site_id, rows)


def hash_tree(root: Path) -> dict:
    """Relative path -> content hash for a directory tree."""
    out = {}
    for path in sorted(Path(root).rglob("*")):
        if path.is_file():
            out[str(path.relative_to(root))] = hashlib.sha256(path.read_bytes()).hexdigest()
    return out


def load_expected_mini():
    return json.loads((FIXTURES / "mini" / "expected_report.json").read_text())
