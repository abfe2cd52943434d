"""Command-line entry point.

Subcommands: fetch, score, classify, evaluate, sweep, stats, report, synth.
Every flag can also be supplied from a TOML config file (top-level keys or a
table named after the subcommand); command-line flags win.  Exit codes:
0 success, 1 domain error, 2 usage error.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from . import __version__, evaluate as ev, fetchclient, ingest, scorer, synth
from .aggregate import FusionError, fuse
from .ioutil import atomic_write_text
from .model import ALL_METRICS, FUSION_METRICS, LabelSet, MetricId

log = logging.getLogger("descimg")


class CliError(Exception):
    pass


def _load_manifest(args) -> ingest.DatasetManifest:
    labels = None
    if getattr(args, "labels", None):
        labels = LabelSet.from_names([s.strip() for s in args.labels.split(",")])
    return ingest.parse_manifest(Path(args.manifest), labels=labels)


def _emit(text: str, out) -> None:
    if out:
        atomic_write_text(Path(out), text)
    else:
        sys.stdout.write(text)


def _parse_metrics(spec: str):
    if spec in (None, "", "all"):
        return FUSION_METRICS
    return tuple(MetricId.parse(tok.strip()) for tok in spec.split(","))


def _scorer_spec(args) -> scorer.ScorerSpec:
    kind = args.scorer
    if kind == "stub":
        return scorer.StubSpec(seed=args.seed, correct_rate=args.p)
    if kind == "precomputed":
        if not args.precomputed_dir:
            raise CliError("--precomputed-dir is required for the precomputed scorer")
        return scorer.PrecomputedSpec(Path(args.precomputed_dir))
    if kind == "external":
        if not args.adapter_cmd:
            raise CliError("--adapter-cmd is required for the external scorer")
        return scorer.ExternalSpec(tuple(args.adapter_cmd.split()), per_image=args.per_image)
    raise CliError(f"unknown scorer {kind!r}")


def _provider(args):
    if args.provider == "mock":
        return fetchclient.MockProvider(seed=args.seed)
    if args.provider == "http":
        if not args.provider_config:
            raise CliError("--provider-config is required for the http provider")
        config = fetchclient.ProviderConfig.from_file(Path(args.provider_config))
        throttle = fetchclient._HostThrottle(args.delay)
        return fetchclient.HttpJsonProvider(config, throttle)
    raise CliError(f"unknown provider {args.provider!r}")


# Subcommand handlers --------------------------------------------------------


def cmd_synth(args) -> int:
    cfg = synth.SynthConfig(
        sites=args.sites,
        classes=args.classes,
        images_per_site=args.images,
        correct_rate=args.p,
        seed=args.seed,
    )
    manifest = synth.generate(Path(args.out), cfg)
    log.info("synth: wrote %d sites under %s", len(manifest.records), args.out)
    return 0


def cmd_score(args) -> int:
    manifest = _load_manifest(args)
    summary = scorer.score_dataset(
        manifest,
        Path(args.images),
        _scorer_spec(args),
        Path(args.out),
        mode=args.mode,
        split=args.split or None,
    )
    for sid, why in summary.failures.items():
        log.warning("score: site %s failed: %s", sid, why)
    log.info(
        "score: %d sites, %d images, %d failures",
        summary.sites_scored, summary.images_scored, len(summary.failures),
    )
    return 0 if not summary.failures else 1


def cmd_fetch(args) -> int:
    manifest = _load_manifest(args)
    policy = fetchclient.FetchPolicy(
        max_images=args.max_images,
        min_edge_px=args.min_edge,
        request_timeout=args.timeout,
        max_concurrent=args.concurrency,
        per_host_delay=args.delay,
    )
    report = fetchclient.batch_fetch(
        manifest, _provider(args), policy, Path(args.dest), query_mode=args.query_mode
    )
    failures = sum(len(o.failed) for o in report.outcomes)
    for o in report.outcomes:
        for ordinal, why in o.failed.items():
            log.warning("fetch: site %s ordinal %02d failed: %s", o.site_id, ordinal, why)
    log.info(
        "fetch: %d sites (%d skipped), %d images saved, %d failures",
        len(report.outcomes), report.skipped_sites, report.saved_total, failures,
    )
    return 0 if failures == 0 else 1


def cmd_classify(args) -> int:
    if args.score_file:
        m, names, _ = ingest.parse_score_document(Path(args.score_file))
        labels = LabelSet.from_names(names)
    else:
        if not (args.scores and args.site):
            raise CliError("need --score-file, or --scores with --site")
        m, names, _ = ingest.parse_score_document(
            Path(args.scores) / f"{args.site}.json"
        )
        labels = LabelSet.from_names(names)
    for metric in _parse_metrics(args.metric):
        fused = fuse(m, metric, labels)
        per_class = "  ".join(
            f"{lab.name}={v:.8f}" for lab, v in zip(labels, fused.per_class)
        )
        print(f"{metric}: {fused.decided.name}  [{per_class}]  images_used={fused.images_used}")
    return 0


def _baselines(args):
    if getattr(args, "baselines", None):
        return json.loads(Path(args.baselines).read_text(encoding="utf-8"))
    return None


def cmd_evaluate(args) -> int:
    manifest = _load_manifest(args)
    load = ingest.load_scores(Path(args.scores), manifest, mode=args.mode, split=args.split)
    for sid in load.unknown_sites:
        log.warning("evaluate: score file for unknown site %s ignored", sid)
    report = ev.evaluate(
        ev.build_evaluation_set(manifest, load, args.split), workers=args.workers
    )
    _emit(ev.render_report(report, args.format, _baselines(args)), args.out)
    return 0


def cmd_sweep(args) -> int:
    manifest = _load_manifest(args)
    snapshots = ev.discover_snapshots(Path(args.snapshots))
    if not snapshots:
        raise CliError(f"no epoch_NNN directories under {args.snapshots}")
    series = ev.sweep(snapshots, manifest, mode=args.mode, split=args.split, workers=args.workers)
    for epoch, why in series.failed:
        log.warning("sweep: epoch %d failed: %s", epoch, why)
    _emit(ev.render_series(series, args.format), args.out)
    return 0


def cmd_stats(args) -> int:
    manifest = _load_manifest(args)
    if args.languages:
        lines = ["language,count"]
        lines += [f"{lang},{n}" for lang, n in ingest.language_table(manifest)]
        _emit("\n".join(lines) + "\n", args.out)
        return 0
    stats = ingest.scan_image_sets(Path(args.images), manifest)
    if args.format == "csv":
        _emit(ingest.histogram_csv(stats), args.out)
    else:
        _emit(ingest.stats_to_json(stats), args.out)
    return 0


def cmd_report(args) -> int:
    text = Path(args.report).read_text(encoding="utf-8")
    if args.series:
        doc = json.loads(text)
        points = tuple(
            (p["epoch"], ev.EvaluationReport.from_json(json.dumps(p["report"])))
            for p in doc["points"]
        )
        series = ev.CheckpointSeries(points, tuple((f[0], f[1]) for f in doc.get("failed", [])))
        _emit(ev.render_series(series, args.format), args.out)
    else:
        report = ev.EvaluationReport.from_json(text)
        _emit(ev.render_report(report, args.format, _baselines(args)), args.out)
    return 0


# Parser ---------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="descimg",
        description="Classify web sites from ordered descriptive-image evidence.",
    )
    parser.add_argument("--version", action="version", version=f"descimg {__version__}")
    parser.add_argument("--config", help="TOML config file mirroring the flags")
    parser.add_argument("-v", "--verbose", action="store_true", default=None)
    sub = parser.add_subparsers(dest="command", required=True)

    def manifest_args(p):
        p.add_argument("--manifest", required=False)
        p.add_argument("--labels", help="comma-separated canonical label order (CSV manifests)")

    p = sub.add_parser("synth", help="generate a planted synthetic dataset")
    p.add_argument("--out", required=False)
    p.add_argument("--sites", type=int)
    p.add_argument("--classes", type=int)
    p.add_argument("--images", type=int)
    p.add_argument("--p", type=float, help="per-image correct probability")
    p.add_argument("--seed", type=int)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("score", help="produce score matrices for a dataset")
    manifest_args(p)
    p.add_argument("--images", help="descriptive-image root")
    p.add_argument("--out", help="score document output directory")
    p.add_argument("--scorer", choices=["stub", "precomputed", "external"])
    p.add_argument("--seed", type=int)
    p.add_argument("--p", type=float, help="stub per-image correct probability")
    p.add_argument("--precomputed-dir")
    p.add_argument("--adapter-cmd", help="external adapter command line")
    p.add_argument("--per-image", action="store_true", default=None)
    p.add_argument("--mode", choices=["softmax", "raw"])
    p.add_argument("--split", choices=["train", "validation", "test", ""])
    p.set_defaults(func=cmd_score)

    p = sub.add_parser("fetch", help="fetch descriptive images for a manifest")
    manifest_args(p)
    p.add_argument("--dest", help="image tree destination root")
    p.add_argument("--provider", choices=["mock", "http"])
    p.add_argument("--provider-config")
    p.add_argument("--seed", type=int, help="mock provider seed")
    p.add_argument("--max-images", type=int)
    p.add_argument("--min-edge", type=int)
    p.add_argument("--concurrency", type=int)
    p.add_argument("--delay", type=float, help="per-host politeness delay, seconds")
    p.add_argument("--timeout", type=float)
    p.add_argument("--query-mode", choices=["url", "domain"])
    p.set_defaults(func=cmd_fetch)

    p = sub.add_parser("classify", help="fuse and decide the class of one site")
    p.add_argument("--score-file", help="single score document")
    p.add_argument("--scores", help="score document directory")
    p.add_argument("--site")
    p.add_argument("--metric", help='metric name(s), e.g. "A15" or "S20,H10"; default all')
    p.set_defaults(func=cmd_classify)

    p = sub.add_parser("evaluate", help="run the 13-metric evaluation")
    manifest_args(p)
    p.add_argument("--scores")
    p.add_argument("--format", choices=["table", "csv", "json"])
    p.add_argument("--out")
    p.add_argument("--baselines", help="JSON of external baseline accuracies")
    p.add_argument("--workers", type=int)
    p.add_argument("--mode", choices=["softmax", "raw"])
    p.add_argument("--split", choices=["train", "validation", "test"])
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("sweep", help="evaluate every epoch_NNN snapshot directory")
    manifest_args(p)
    p.add_argument("--snapshots", help="root containing epoch_NNN score directories")
    p.add_argument("--format", choices=["plot-series", "json", "table"])
    p.add_argument("--out")
    p.add_argument("--workers", type=int)
    p.add_argument("--mode", choices=["softmax", "raw"])
    p.add_argument("--split", choices=["train", "validation", "test"])
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("stats", help="dataset statistics (image dimensions, languages)")
    manifest_args(p)
    p.add_argument("--images")
    p.add_argument("--format", choices=["json", "csv"])
    p.add_argument("--languages", action="store_true", default=None)
    p.add_argument("--out")
    p.set_defaults(func=cmd_stats)

    p = sub.add_parser("report", help="re-render a saved report or sweep series")
    p.add_argument("--report", help="saved report/series JSON", required=False)
    p.add_argument("--series", action="store_true", default=None)
    p.add_argument("--format", choices=["table", "csv", "json", "plot-series"])
    p.add_argument("--baselines")
    p.add_argument("--out")
    p.set_defaults(func=cmd_report)

    return parser


DEFAULTS = {
    "synth": {"out": None, "sites": 12, "classes": 4, "images": 20, "p": 0.7, "seed": 0},
    "score": {
        "scorer": "stub", "seed": 0, "p": 0.7, "mode": "softmax", "split": "",
        "per_image": False,
    },
    "fetch": {
        "provider": "mock", "seed": 0, "max_images": 20, "min_edge": 64,
        "concurrency": 4, "delay": 0.0, "timeout": 10.0, "query_mode": "url",
    },
    "classify": {"metric": "all"},
    "evaluate": {"format": "table", "workers": 1, "mode": "softmax", "split": "test"},
    "sweep": {"format": "plot-series", "workers": 1, "mode": "softmax", "split": "test"},
    "stats": {"format": "json", "languages": False},
    "report": {"format": "table", "series": False},
}

REQUIRED = {
    "synth": ["out"],
    "score": ["manifest", "images", "out"],
    "fetch": ["manifest", "dest"],
    "classify": [],
    "evaluate": ["manifest", "scores"],
    "sweep": ["manifest", "snapshots"],
    "stats": ["manifest"],
    "report": ["report"],
}


def _apply_config(args: argparse.Namespace) -> None:
    config = {}
    if args.config:
        with open(args.config, "rb") as fh:
            config = tomllib.load(fh)
    section = config.get(args.command, {})
    defaults = DEFAULTS.get(args.command, {})
    for key, value in vars(args).items():
        if value is not None:
            continue
        for source in (section, config, defaults):
            if key in source:
                setattr(args, key, source[key])
                break
    missing = [k for k in REQUIRED.get(args.command, []) if getattr(args, k, None) is None]
    if missing:
        raise CliError(
            f"{args.command}: missing required option(s): "
            + ", ".join("--" + k.replace("_", "-") for k in missing)
        )


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(levelname)s %(name)s %(message)s",
    )
    try:
        _apply_config(args)
        return args.func(args)
    except CliError as exc:
        parser.exit(2, f"error: {exc}\n")
    except (
        ingest.IngestError,
        ev.EvaluationError,
        FusionError,
        scorer.ScorerError,
        fetchclient.FetchError,
        FileNotFoundError,
    ) as exc:
        log.error("%s", exc)
        return 1


if __name__ == "__main__":
    sys.exit(main())
