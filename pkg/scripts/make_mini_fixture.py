#!/usr/bin/env python3
"""Generate the committed mini fixture: 12 sites x 4 classes, stub-scored.

Writes tests/fixtures/mini/{manifest.json,manifest.csv,scores/}.  Run once;
the outputs are committed.  Expected evaluation numbers come from the
independent scripts/mini_fixture_oracle.py, not from this script.
"""

import shutil
import sys
import tempfile
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "src"))

from descimg import synth  # noqa: E402
from descimg.scorer import StubSpec, score_dataset  # noqa: E402

FIXTURE = Path(__file__).resolve().parents[1] / "tests" / "fixtures" / "mini"


def main():
    cfg = synth.SynthConfig(sites=12, classes=4, images_per_site=20,
                            correct_rate=0.7, seed=123)
    with tempfile.TemporaryDirectory() as tmp:
        tmp = Path(tmp)
        manifest = synth.generate(tmp, cfg)
        summary = score_dataset(
            manifest, tmp / "images",
            StubSpec(seed=cfg.seed, correct_rate=cfg.correct_rate),
            tmp / "scores",
        )
        assert summary.sites_scored == 12 and not summary.failures
        FIXTURE.mkdir(parents=True, exist_ok=True)
        shutil.copy(tmp / "manifest.json", FIXTURE / "manifest.json")
        shutil.copy(tmp / "manifest.csv", FIXTURE / "manifest.csv")
        if (FIXTURE / "scores").exists():
            shutil.rmtree(FIXTURE / "scores")
        shutil.copytree(tmp / "scores", FIXTURE / "scores")
    print(f"wrote fixture under {FIXTURE}")


if __name__ == "__main__":
    main()
