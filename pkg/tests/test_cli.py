import json

import pytest

from descimg.cli import main

from helpers import FIXTURES, hash_tree
from mockserver import MockImageServer


def run(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr().out
    return code, out


def test_version_flag(capsys):
    with pytest.raises(SystemExit) as err:
        main(["--version"])
    assert err.value.code == 0


def test_unknown_flag_is_usage_error():
    with pytest.raises(SystemExit) as err:
        main(["evaluate", "--bogus"])
    assert err.value.code == 2


def test_missing_required_option_is_usage_error():
    with pytest.raises(SystemExit) as err:
        main(["evaluate"])
    assert err.value.code == 2


def test_synth_score_evaluate_pipeline(tmp_path, capsys):
    root = tmp_path / "data"
    code, _ = run(
        capsys, "synth", "--out", str(root), "--sites", "8", "--classes", "4",
        "--images", "10", "--p", "0.8", "--seed", "3",
    )
    assert code == 0
    code, _ = run(
        capsys, "score", "--manifest", str(root / "manifest.json"),
        "--images", str(root / "images"), "--out", str(root / "scores"),
        "--scorer", "stub", "--seed", "3", "--p", "0.8",
    )
    assert code == 0
    code, out = run(
        capsys, "evaluate", "--manifest", str(root / "manifest.json"),
        "--scores", str(root / "scores"), "--format", "table",
    )
    assert code == 0
    assert "S20" in out and "%" in out


def test_synth_determinism(tmp_path, capsys):
    args = ["--sites", "5", "--classes", "4", "--images", "3", "--p", "0.6", "--seed", "7"]
    assert run(capsys, "synth", "--out", str(tmp_path / "a"), *args)[0] == 0
    assert run(capsys, "synth", "--out", str(tmp_path / "b"), *args)[0] == 0
    assert hash_tree(tmp_path / "a") == hash_tree(tmp_path / "b")


def test_classify_reference_sample(capsys):
    code, out = run(
        capsys, "classify",
        "--score-file", str(FIXTURES / "reference_sample.json"),
        "--metric", "A15,S20",
    )
    assert code == 0
    lines = out.strip().splitlines()
    assert lines[0].startswith("A15: machinery")
    assert lines[1].startswith("S20: machinery")


def test_evaluate_mini_fixture_json_out(tmp_path, capsys):
    out_path = tmp_path / "report.json"
    code, _ = run(
        capsys, "evaluate", "--manifest", str(FIXTURES / "mini" / "manifest.json"),
        "--scores", str(FIXTURES / "mini" / "scores"),
        "--format", "json", "--out", str(out_path),
    )
    assert code == 0
    doc = json.loads(out_path.read_text())
    assert doc["n_sites"] == 12
    # re-render the saved report with baselines
    baselines = tmp_path / "base.json"
    baselines.write_text(json.dumps({"External": {"A15": 0.949}}))
    code, out = run(
        capsys, "report", "--report", str(out_path), "--format", "table",
        "--baselines", str(baselines),
    )
    assert code == 0
    assert "94.90%" in out and "-" in out


def test_sweep_cli(tmp_path, capsys):
    snaps = tmp_path / "snaps"
    for name in ("epoch_005", "epoch_010"):
        d = snaps / name
        d.mkdir(parents=True)
        for f in (FIXTURES / "mini" / "scores").iterdir():
            (d / f.name).write_bytes(f.read_bytes())
    code, out = run(
        capsys, "sweep", "--manifest", str(FIXTURES / "mini" / "manifest.json"),
        "--snapshots", str(snaps),
    )
    assert code == 0
    assert out.splitlines()[0] == "epoch,metric,accuracy"
    assert len(out.splitlines()) == 1 + 26


def test_stats_cli(tmp_path, capsys):
    code, out = run(
        capsys, "stats", "--manifest", str(FIXTURES / "imageset" / "manifest.csv"),
        "--images", str(FIXTURES / "imageset" / "images"),
    )
    assert code == 0
    assert json.loads(out)["total_images"] == 6
    code, out = run(
        capsys, "stats", "--manifest", str(FIXTURES / "imageset" / "manifest.csv"),
        "--images", str(FIXTURES / "imageset" / "images"), "--format", "csv",
    )
    assert out.splitlines()[0] == "bin_base_percent,count"
    code, out = run(
        capsys, "stats", "--manifest", str(FIXTURES / "imageset" / "manifest.csv"),
        "--languages",
    )
    assert out.splitlines()[1] == "unknown,3"


def test_fetch_cli_with_http_provider(tmp_path, capsys):
    manifest = tmp_path / "m.csv"
    manifest.write_text(
        "site_id,url,label,split,language,screenshot_path,text_path\n"
        "s1,http://one.test,a,test,,,\n"
        "s2,http://two.test,b,test,,,\n"
    )
    with MockImageServer() as server:
        config = tmp_path / "provider.json"
        config.write_text(
            json.dumps(
                {
                    "endpoint_template": f"http://127.0.0.1:{server.port}/search?q={{query}}",
                    "results_path": "items",
                    "rank_field": "rank",
                    "url_field": "thumb",
                    "width_field": "w",
                    "height_field": "h",
                    "mime_field": "type",
                }
            )
        )
        code, _ = run(
            capsys, "fetch", "--manifest", str(manifest), "--dest", str(tmp_path / "imgs"),
            "--provider", "http", "--provider-config", str(config),
        )
    assert code == 0
    assert (tmp_path / "imgs" / "s1" / "01.jpg").is_file()
    assert (tmp_path / "imgs" / "s2" / "meta.json").is_file()


def test_config_file_supplies_flags(tmp_path, capsys):
    config = tmp_path / "run.toml"
    config.write_text(
        "[synth]\n"
        f'out = "{tmp_path / "data"}"\n'
        "sites = 4\nclasses = 2\nimages = 2\nseed = 5\n"
    )
    code, _ = run(capsys, "--config", str(config), "synth")
    assert code == 0
    manifest = json.loads((tmp_path / "data" / "manifest.json").read_text())
    assert len(manifest["records"]) == 4
    # flags override the config file
    code, _ = run(
        capsys, "--config", str(config), "synth", "--out", str(tmp_path / "other"),
        "--sites", "3",
    )
    assert len(json.loads((tmp_path / "other" / "manifest.json").read_text())["records"]) == 3


def test_domain_error_exit_code(tmp_path, capsys):
    code = main(
        ["evaluate", "--manifest", str(tmp_path / "missing.csv"), "--scores", str(tmp_path)]
    )
    assert code == 1
