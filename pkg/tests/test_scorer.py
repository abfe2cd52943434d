import json
import sys

import pytest

from descimg import ingest, scorer, synth
from descimg.model import LabelSet

from helpers import FIXTURES, REFERENCE_LABELS, hash_tree

LABELS = LabelSet.from_names(["a", "b", "c", "d"])


@pytest.fixture
def tiny_dataset(tmp_path):
    cfg = synth.SynthConfig(sites=4, classes=4, images_per_site=6, seed=11)
    manifest = synth.generate(tmp_path, cfg)
    return manifest, tmp_path


def test_stub_rows_are_softmax_valid(tiny_dataset):
    manifest, root = tiny_dataset
    record = manifest.records[0]
    m = scorer.score_site(
        record.site_id, root / "images" / record.site_id,
        scorer.StubSpec(seed=5), manifest.labels, true_label=record.label,
    )
    assert m.n_rows == 6
    for _, vec in m.rows:
        assert all(v > 0 for v in vec)
        assert abs(sum(vec) - 1.0) < 1e-12


def test_stub_is_deterministic(tiny_dataset):
    manifest, root = tiny_dataset
    record = manifest.records[1]
    args = (
        record.site_id, root / "images" / record.site_id,
        scorer.StubSpec(seed=42, correct_rate=0.6), manifest.labels,
    )
    assert scorer.score_site(*args, true_label=record.label) == scorer.score_site(
        *args, true_label=record.label
    )


def test_stub_p1_always_correct(tiny_dataset):
    manifest, root = tiny_dataset
    for record in manifest.records:
        m = scorer.score_site(
            record.site_id, root / "images" / record.site_id,
            scorer.StubSpec(seed=1, correct_rate=1.0), manifest.labels,
            true_label=record.label,
        )
        for _, vec in m.rows:
            assert max(range(4), key=lambda c: vec[c]) == record.label.index


def test_stub_requires_label(tiny_dataset):
    manifest, root = tiny_dataset
    with pytest.raises(scorer.ScorerError, match="true label"):
        scorer.score_site(
            "site_0", root / "images" / "site_0", scorer.StubSpec(), manifest.labels
        )


def test_no_images_is_an_error(tmp_path):
    with pytest.raises(scorer.ScorerError, match="no evidence"):
        scorer.score_site(
            "ghost", tmp_path / "nowhere", scorer.StubSpec(), LABELS,
            true_label=LABELS[0],
        )


def test_precomputed_passes_table_values_through(reference_matrix):
    m = scorer.score_site(
        "reference_sample", FIXTURES, scorer.PrecomputedSpec(FIXTURES), REFERENCE_LABELS
    )
    assert m == reference_matrix


def test_precomputed_missing_file():
    with pytest.raises(scorer.ScorerError, match="no precomputed score file"):
        scorer.score_site("nope", FIXTURES, scorer.PrecomputedSpec(FIXTURES), REFERENCE_LABELS)


def test_score_dataset_round_trip(tiny_dataset, tmp_path):
    manifest, root = tiny_dataset
    out = tmp_path / "out_scores"
    spec = scorer.StubSpec(seed=3)
    summary = scorer.score_dataset(manifest, root / "images", spec, out)
    assert summary.sites_scored == 4
    assert summary.images_scored == 24
    assert not summary.failures
    # load_scores returns exactly what score_dataset wrote
    load = ingest.load_scores(out, manifest)
    assert not load.invalid and not load.missing_sites
    for record in manifest.records:
        direct = scorer.score_site(
            record.site_id, root / "images" / record.site_id, spec,
            manifest.labels, true_label=record.label,
        )
        assert load.matrices[record.site_id] == direct
    # rerun is byte-identical
    first = hash_tree(out)
    scorer.score_dataset(manifest, root / "images", spec, out)
    assert hash_tree(out) == first


def test_score_dataset_collects_failures(tiny_dataset, tmp_path):
    manifest, root = tiny_dataset
    import shutil

    shutil.rmtree(root / "images" / manifest.records[0].site_id)
    summary = scorer.score_dataset(
        manifest, root / "images", scorer.StubSpec(seed=3), tmp_path / "s"
    )
    assert summary.sites_scored == 3
    assert list(summary.failures) == [manifest.records[0].site_id]


# External adapter -----------------------------------------------------------


def write_adapter(tmp_path, body: str):
    path = tmp_path / "adapter.py"
    path.write_text("import json, sys\nreq = json.load(sys.stdin)\n" + body)
    return (sys.executable, str(path))


def test_external_adapter_echoes_canned_doc(tiny_dataset, tmp_path):
    manifest, root = tiny_dataset
    canned = {
        "site_id": "site_0",
        "labels": list(manifest.labels.names),
        "mode": "softmax",
        "rows": [{"ordinal": o, "scores": [0.7, 0.1, 0.1, 0.1]} for o in range(1, 7)],
    }
    (tmp_path / "canned.json").write_text(json.dumps(canned))
    cmd = write_adapter(
        tmp_path, f"print(open({str(tmp_path / 'canned.json')!r}).read())\n"
    )
    m = scorer.score_site(
        "site_0", root / "images" / "site_0", scorer.ExternalSpec(cmd), manifest.labels
    )
    assert [list(v) for _, v in m.rows] == [r["scores"] for r in canned["rows"]]


def test_external_adapter_per_image(tiny_dataset, tmp_path):
    manifest, root = tiny_dataset
    cmd = write_adapter(
        tmp_path,
        "assert len(req['image_paths']) == 1\n"
        "print(json.dumps({'rows': [{'ordinal': 1, 'scores': [0.4, 0.3, 0.2, 0.1]}]}))\n",
    )
    m = scorer.score_site(
        "site_0", root / "images" / "site_0",
        scorer.ExternalSpec(cmd, per_image=True), manifest.labels,
    )
    assert m.ordinals == (1, 2, 3, 4, 5, 6)
    assert all(v == (0.4, 0.3, 0.2, 0.1) for _, v in m.rows)


def test_external_adapter_nonzero_exit(tiny_dataset, tmp_path):
    manifest, root = tiny_dataset
    cmd = write_adapter(tmp_path, "sys.exit(3)\n")
    with pytest.raises(scorer.ScorerError, match="exit 3"):
        scorer.score_site(
            "site_0", root / "images" / "site_0", scorer.ExternalSpec(cmd), manifest.labels
        )


def test_external_adapter_invalid_rows(tiny_dataset, tmp_path):
    manifest, root = tiny_dataset
    cmd = write_adapter(
        tmp_path,
        "print(json.dumps({'rows': [{'ordinal': 1, 'scores': [0.9, 0.9, 0.9, 0.9]}]}))\n",
    )
    with pytest.raises(scorer.ScorerError, match="invalid"):
        scorer.score_site(
            "site_0", root / "images" / "site_0", scorer.ExternalSpec(cmd), manifest.labels
        )


def test_external_adapter_garbage_output(tiny_dataset, tmp_path):
    manifest, root = tiny_dataset
    cmd = write_adapter(tmp_path, "print('not json')\n")
    with pytest.raises(scorer.ScorerError, match="malformed"):
        scorer.score_site(
            "site_0", root / "images" / "site_0", scorer.ExternalSpec(cmd), manifest.labels
        )
