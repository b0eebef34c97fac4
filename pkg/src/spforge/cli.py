"""Command-line entry point.

    spforge <subcommand> [flags]

Subcommands: ingest, fuse, correlate, split, train, predict, evaluate,
ablate. Flags override the --config file, which overrides defaults.
Exit codes: 0 success, 1 usage, 2 data/validation, 3 runtime (I/O, network).
"""

from __future__ import annotations

import argparse
import json
import os
import sys

import requests

from .dataset import DatasetSplit, load_records, stratified_split
from .evaluation import render_ablation, render_report
from .fusion import fuse, load_embeddings
from .gbt import load_model, save_model
from .ingest import (
    BugNotFoundError,
    BugzillaClient,
    MalformedResponseError,
    TransportError,
    assemble_records,
    read_annotations,
)
from .pipeline import (
    PipelineConfig,
    dump_json,
    evaluate_model,
    predict_records,
    resolve_config,
    run_ablation,
    run_correlations,
    train_arm,
    write_json,
)

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_RUNTIME = 3

BUGZILLA_URL_ENV = "SPFORGE_BUGZILLA_URL"


class _Parser(argparse.ArgumentParser):
    # argparse exits 2 on usage errors by default; the contract is 1
    def error(self, message):
        self.print_usage(sys.stderr)
        sys.stderr.write(f"{self.prog}: error: {message}\n")
        raise SystemExit(EXIT_USAGE)


def _add_common(p: argparse.ArgumentParser, *, severity_flag: bool = True):
    p.add_argument("--config", help="JSON config file mirroring the pipeline configuration")
    p.add_argument("--records", help="records file (one JSON object per line)")
    p.add_argument("--embeddings", help="embeddings file (one JSON object per line)")
    p.add_argument("--model", help="model file path")
    p.add_argument("--out", help="output path")
    p.add_argument("--seed", type=int, help="random seed (default 0)")
    p.add_argument("--test-fraction", type=float, dest="test_fraction", help="test fraction (default 0.2)")
    if severity_flag:
        group = p.add_mutually_exclusive_group()
        group.add_argument(
            "--with-severity", dest="include_severity", action="store_true", default=None
        )
        group.add_argument(
            "--without-severity", dest="include_severity", action="store_false", default=None
        )


def build_parser() -> _Parser:
    parser = _Parser(prog="spforge", description="Multimodal story-point estimation pipeline.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("ingest", help="fetch bugs from a tracker and assemble a records file")
    _add_common(p, severity_flag=False)
    p.add_argument("--ids", help="comma-separated bug ids")
    p.add_argument("--ids-file", dest="ids_file", help="file with one bug id per line")
    p.add_argument("--annotations", required=True, help="story-point sidecar CSV (id,story_point)")
    p.add_argument("--base-url", dest="base_url", help=f"tracker base URL (or ${BUGZILLA_URL_ENV})")
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("fuse", help="write the fused feature matrix as JSON")
    _add_common(p)
    p.set_defaults(func=cmd_fuse)

    p = sub.add_parser("correlate", help="write mean-of-embedding correlation matrices")
    _add_common(p)
    p.set_defaults(func=cmd_correlate)

    p = sub.add_parser("split", help="write a stratified train/test split")
    _add_common(p)
    p.set_defaults(func=cmd_split)

    p = sub.add_parser("train", help="train a model on the training split")
    _add_common(p)
    p.add_argument("--split", dest="split_file", help="reuse a split file instead of re-splitting")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("predict", help="predict story points for a records file")
    _add_common(p)
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("evaluate", help="score a model against actual story points")
    _add_common(p)
    p.add_argument("--split", dest="split_file", help="evaluate on this split's test rows")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("ablate", help="paired with/without-severity train+evaluate")
    _add_common(p, severity_flag=False)
    p.set_defaults(func=cmd_ablate)

    return parser


def _config_from_args(args) -> PipelineConfig:
    file_config = None
    if args.config:
        with open(args.config, "r", encoding="utf-8") as fh:
            file_config = json.load(fh)
    overrides = {
        key: getattr(args, key, None)
        for key in ("records", "embeddings", "model", "out", "seed", "test_fraction", "base_url")
    }
    overrides["include_severity"] = getattr(args, "include_severity", None)
    return resolve_config(file_config, overrides)


def _require(cfg: PipelineConfig, *fields: str):
    missing = [f for f in fields if getattr(cfg, f) is None]
    if missing:
        flags = ", ".join(f"--{f.replace('_', '-')}" for f in missing)
        raise UsageError(f"missing required option(s): {flags}")


class UsageError(Exception):
    pass


def _load_corpus(cfg: PipelineConfig):
    records = load_records(cfg.records, classes=cfg.fib_classes)
    embeddings, _header = load_embeddings(cfg.embeddings)
    return records, embeddings


def _load_split(path) -> DatasetSplit:
    with open(path, "r", encoding="utf-8") as fh:
        return DatasetSplit.from_dict(json.load(fh))


def cmd_ingest(args, cfg: PipelineConfig) -> int:
    _require(cfg, "out")
    base_url = cfg.base_url or os.environ.get(BUGZILLA_URL_ENV)
    if not base_url:
        raise UsageError(f"no tracker URL: pass --base-url or set ${BUGZILLA_URL_ENV}")
    if args.ids:
        ids = [int(tok) for tok in args.ids.split(",") if tok.strip()]
    elif args.ids_file:
        with open(args.ids_file, "r", encoding="utf-8") as fh:
            ids = [int(line) for line in fh if line.strip()]
    else:
        raise UsageError("pass --ids or --ids-file")

    client = BugzillaClient(base_url)
    bugs = client.fetch_bugs(ids)
    annotations = read_annotations(args.annotations)
    summary = assemble_records(
        bugs, annotations, cfg.out, image_ref_template=f"{base_url}/attachment.cgi?id={{id}}"
    )
    print(summary)
    return EXIT_OK


def cmd_fuse(args, cfg: PipelineConfig) -> int:
    _require(cfg, "records", "embeddings", "out")
    records, embeddings = _load_corpus(cfg)
    matrix = fuse(records, embeddings, cfg.include_severity, cfg.severity_scale, cfg.fib_classes)
    write_json(
        {
            "config": cfg.to_dict(),
            "column_names": matrix.column_names,
            "include_severity": matrix.include_severity,
            "story_ids": [r.story_id for r in records],
            "labels": matrix.labels.tolist(),
            "rows": matrix.rows.tolist(),
        },
        cfg.out,
    )
    print(f"fused {matrix.n_rows} rows x {matrix.n_features} features -> {cfg.out}")
    return EXIT_OK


def cmd_correlate(args, cfg: PipelineConfig) -> int:
    _require(cfg, "records", "embeddings", "out")
    records, embeddings = _load_corpus(cfg)
    out = {"config": cfg.to_dict(), **run_correlations(records, embeddings, cfg)}
    write_json(out, cfg.out)
    print(f"wrote correlation matrices -> {cfg.out}")
    return EXIT_OK


def cmd_split(args, cfg: PipelineConfig) -> int:
    _require(cfg, "records", "out")
    records = load_records(cfg.records, classes=cfg.fib_classes)
    split = stratified_split(records, cfg.test_fraction, cfg.seed, cfg.fib_classes)
    write_json({**split.to_dict(), "test_fraction": cfg.test_fraction}, cfg.out)
    print(f"split {len(split.train)} train / {len(split.test)} test -> {cfg.out}")
    return EXIT_OK


def cmd_train(args, cfg: PipelineConfig) -> int:
    _require(cfg, "records", "embeddings", "model")
    records, embeddings = _load_corpus(cfg)
    if args.split_file:
        split = _load_split(args.split_file)
    else:
        split = stratified_split(records, cfg.test_fraction, cfg.seed, cfg.fib_classes)
    arm = train_arm(records, embeddings, split, cfg.include_severity, cfg)
    save_model(arm.model, cfg.model)
    if cfg.out:
        write_json(
            {
                "config": cfg.to_dict(),
                "split": split.to_dict(),
                "validation_ids": arm.validation_ids,
                "train_report": arm.train_report.to_dict(),
            },
            cfg.out,
        )
    rep = arm.train_report
    print(
        f"trained {rep.rounds_completed} rounds (best {rep.best_round}"
        f"{', stopped early' if rep.stopped_early else ''}) -> {cfg.model}"
    )
    return EXIT_OK


def cmd_predict(args, cfg: PipelineConfig) -> int:
    _require(cfg, "records", "embeddings", "model", "out")
    model = load_model(cfg.model)
    records = load_records(cfg.records, classes=model.fib_classes)
    embeddings, _ = load_embeddings(cfg.embeddings)
    predictions = predict_records(model, records, embeddings, cfg.severity_scale)
    with open(cfg.out, "w", encoding="utf-8") as fh:
        for row in predictions:
            fh.write(json.dumps(row, sort_keys=True) + "\n")
    print(f"predicted {len(predictions)} stories -> {cfg.out}")
    return EXIT_OK


def cmd_evaluate(args, cfg: PipelineConfig) -> int:
    _require(cfg, "records", "embeddings", "model", "out")
    model = load_model(cfg.model)
    records = load_records(cfg.records, classes=model.fib_classes)
    embeddings, _ = load_embeddings(cfg.embeddings)
    if args.split_file:
        split = _load_split(args.split_file)
        by_id = {r.story_id: r for r in records}
        records = [by_id[i] for i in split.test]
    report = evaluate_model(model, records, embeddings, cfg.severity_scale)
    write_json({"config": cfg.to_dict(), "report": report.to_dict()}, cfg.out)
    print(render_report(report))
    return EXIT_OK


def cmd_ablate(args, cfg: PipelineConfig) -> int:
    _require(cfg, "records", "embeddings", "out")
    records, embeddings = _load_corpus(cfg)
    result = run_ablation(records, embeddings, cfg)
    write_json(result.to_dict(cfg), cfg.out)
    print(render_ablation(result.diff))
    print(f"\nwrote ablation report -> {cfg.out}")
    return EXIT_OK


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else EXIT_USAGE

    try:
        cfg = _config_from_args(args)
        return args.func(args, cfg)
    except UsageError as exc:
        print(f"spforge: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (ValueError, KeyError, json.JSONDecodeError, BugNotFoundError, MalformedResponseError) as exc:
        print(f"spforge: data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (OSError, TransportError, requests.RequestException) as exc:
        print(f"spforge: runtime error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
