import csv
import json

import pytest
import torch

from descimg_trainer import (
    TrainSpec,
    TrainerError,
    export_scores,
    load_snapshot,
    train,
)
from descimg_trainer.cli import main


def tiny_spec(fixture_dataset, run_dir, **overrides):
    base = dict(
        architecture="tiny",
        manifest=fixture_dataset["manifest"],
        images_root=fixture_dataset["images"],
        run_dir=run_dir,
        input_size=32,
        learning_rate=1e-3,
        epochs=5,
        snapshot_every=5,
        batch_size=8,
        pretrained=False,
        seed=11,
    )
    base.update(overrides)
    return TrainSpec(**base)


def read_curves(run_dir):
    with open(run_dir / "curves.csv", newline="") as fh:
        return list(csv.DictReader(fh))


def test_spec_invariants():
    with pytest.raises(ValueError, match="snapshot_every"):
        TrainSpec(snapshot_every=0)
    with pytest.raises(ValueError, match="architecture"):
        TrainSpec(architecture="alexnet")


def test_train_missing_images_fails_fast(fixture_dataset, tmp_path):
    spec = tiny_spec(fixture_dataset, tmp_path / "run",
                     images_root=tmp_path / "nowhere")
    with pytest.raises(TrainerError, match="no training images"):
        train(spec)
    assert not (tmp_path / "run" / "curves.csv").exists()


def test_single_epoch_run(fixture_dataset, tmp_path):
    spec = tiny_spec(fixture_dataset, tmp_path / "run", epochs=1)
    run_dir = train(spec)
    snaps = sorted(p.name for p in run_dir.iterdir() if p.is_dir())
    assert snaps == ["epoch_001"]
    curves = read_curves(run_dir)
    assert [r["split"] for r in curves] == ["train", "validation"]
    assert all(r["epoch"] == "1" for r in curves)


def test_snapshot_cadence(fixture_dataset, tmp_path):
    spec = tiny_spec(fixture_dataset, tmp_path / "run", epochs=10, snapshot_every=5)
    run_dir = train(spec)
    snaps = sorted(p.name for p in run_dir.iterdir() if p.is_dir())
    assert snaps == ["epoch_005", "epoch_010"]
    assert len(read_curves(run_dir)) == 10 * 2  # train + validation per epoch


def test_snapshot_round_trip(fixture_dataset, tmp_path):
    run_dir = train(tiny_spec(fixture_dataset, tmp_path / "run", epochs=1))
    model, labels, input_size = load_snapshot(run_dir / "epoch_001")
    assert labels == ("machinery", "music", "sport", "tourism")
    assert input_size == 32
    spec_doc = json.loads((run_dir / "epoch_001" / "spec.json").read_text())
    assert spec_doc["architecture"] == "tiny"
    out = model(torch.zeros(1, 3, 32, 32))
    assert out.shape == (1, 4)


def test_export_determinism_within_tolerance(fixture_dataset, tmp_path):
    docs = []
    for run in ("a", "b"):
        run_dir = train(tiny_spec(fixture_dataset, tmp_path / run, epochs=2))
        out = tmp_path / f"scores_{run}"
        export_scores(run_dir / "epoch_002", fixture_dataset["manifest"],
                      fixture_dataset["images"], out)
        docs.append({
            p.name: json.loads(p.read_text()) for p in sorted(out.glob("*.json"))
        })
    assert docs[0].keys() == docs[1].keys()
    for name in docs[0]:
        for ra, rb in zip(docs[0][name]["rows"], docs[1][name]["rows"]):
            assert ra["ordinal"] == rb["ordinal"]
            for va, vb in zip(ra["scores"], rb["scores"]):
                assert abs(va - vb) < 1e-5


def test_export_skips_unreadable_image(fixture_dataset, tmp_path):
    run_dir = train(tiny_spec(fixture_dataset, tmp_path / "run", epochs=1))
    import shutil

    images = tmp_path / "images"
    shutil.copytree(fixture_dataset["images"], images)
    test_site = "site_08"  # first test-split site
    (images / test_site / "02.jpg").write_bytes(b"not a jpeg")
    out = tmp_path / "scores"
    summary = export_scores(run_dir / "epoch_001", fixture_dataset["manifest"],
                            images, out)
    assert f"{test_site}/02.jpg" in summary.skipped_images
    doc = json.loads((out / f"{test_site}.json").read_text())
    assert [r["ordinal"] for r in doc["rows"]] == [1, 3]


def test_export_empty_split_succeeds(fixture_dataset, tmp_path):
    run_dir = train(tiny_spec(fixture_dataset, tmp_path / "run", epochs=1))
    summary = export_scores(run_dir / "epoch_001", fixture_dataset["manifest"],
                            fixture_dataset["images"], tmp_path / "scores",
                            split="holdout")
    assert summary.sites_exported == 0
    assert list((tmp_path / "scores").glob("*.json")) == []


def test_export_rejects_label_mismatch(fixture_dataset, tmp_path):
    run_dir = train(tiny_spec(fixture_dataset, tmp_path / "run", epochs=1))
    other = tmp_path / "m.json"
    other.write_text(json.dumps({
        "labels": ["x", "y"],
        "records": [{"site_id": "s", "label": "x", "split": "test"}],
    }))
    with pytest.raises(TrainerError, match="labels"):
        export_scores(run_dir / "epoch_001", other,
                      fixture_dataset["images"], tmp_path / "scores")


def test_cli_train_and_export(fixture_dataset, tmp_path, capsys):
    code = main([
        "train", "--manifest", str(fixture_dataset["manifest"]),
        "--images", str(fixture_dataset["images"]),
        "--run-dir", str(tmp_path / "run"), "--architecture", "tiny",
        "--input-size", "32", "--epochs", "1", "--batch-size", "8",
        "--no-pretrained", "--seed", "1",
    ])
    assert code == 0
    code = main([
        "export", "--snapshot", str(tmp_path / "run" / "epoch_001"),
        "--manifest", str(fixture_dataset["manifest"]),
        "--images", str(fixture_dataset["images"]),
        "--out", str(tmp_path / "scores"),
    ])
    assert code == 0
    assert "exported 4 sites" in capsys.readouterr().out
    assert len(list((tmp_path / "scores").glob("*.json"))) == 4


def test_cli_error_exit_code(tmp_path, capsys):
    code = main([
        "export", "--snapshot", str(tmp_path / "none"),
        "--manifest", str(tmp_path / "m.csv"),
        "--images", str(tmp_path), "--out", str(tmp_path / "out"),
    ])
    assert code == 1
