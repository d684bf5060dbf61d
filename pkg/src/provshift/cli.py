"""Command-line front end: synth, sweep, report, featurize."""

from __future__ import annotations

import argparse
import dataclasses
import json
import math
import sys
from pathlib import Path

from .corpus import (
    EmbeddingTableError,
    attach_embeddings,
    load_corpus,
    load_embedding_table,
    write_corpus,
)
from .runner import (
    aggregate_report,
    load_sweep_spec,
    read_rows,
    run_sweep,
    write_plot_data,
    write_rows,
    write_skip_log,
    write_slope_reports,
)
from .synth import SynthConfig, generate_corpus

_LOG_BASES = {"e": math.e, "2": 2.0, "10": 10.0}


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="provshift",
        description=(
            "Measure text-classifier robustness to provenance-conditional "
            "label shift, with and without backdoor adjustment."
        ),
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_synth = sub.add_parser("synth", help="generate a synthetic two-source corpus")
    p_synth.add_argument("--out", required=True, help="corpus file to write")
    p_synth.add_argument("--seed", type=int, default=None, help="generator seed override")
    p_synth.add_argument("--config", default=None, help="JSON file with generator fields")

    p_sweep = sub.add_parser("sweep", help="run a shift sweep from a config file")
    p_sweep.add_argument("--config", required=True, help="sweep config JSON")
    p_sweep.add_argument("--out-dir", required=True, help="directory for rows.csv and skips.jsonl")
    p_sweep.add_argument("--jobs", type=int, default=1, help="parallel worker count")
    p_sweep.add_argument("--seed", type=int, default=None, help="base seed override")

    p_report = sub.add_parser("report", help="fit robustness slopes from a rows file")
    p_report.add_argument("--rows", required=True, help="rows.csv from a sweep")
    p_report.add_argument("--out-dir", required=True, help="directory for slopes.csv and plot_data.jsonl")
    p_report.add_argument("--log-base", choices=sorted(_LOG_BASES), default="e")
    p_report.add_argument(
        "--slope-on",
        choices=["rows", "alpha_means"],
        default="rows",
        help="fit across all repeat rows or across per-alpha means",
    )

    p_feat = sub.add_parser("featurize", help="validate an embedding table against a corpus")
    p_feat.add_argument("--corpus", required=True)
    p_feat.add_argument("--embeddings", required=True)
    p_feat.add_argument(
        "--check-only",
        action="store_true",
        help="report pass/fail only; no per-source statistics",
    )
    return parser


def _load_corpus_any_sources(path: str):
    """Load a corpus without knowing its source names up front.

    Sources are mapped positionally in order of first appearance, which is
    all a validation join needs.
    """
    seen: list[str] = []
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            try:
                source = json.loads(line).get("source")
            except json.JSONDecodeError:
                continue  # load_corpus will report the line number
            if isinstance(source, str) and source not in seen:
                seen.append(source)
    if len(seen) > 2:
        raise SystemExit(f"corpus names more than two sources: {seen}")
    while len(seen) < 2:
        seen.append(f"__absent_source_{len(seen)}__")
    return load_corpus(path, seen)


def _cmd_synth(args: argparse.Namespace) -> int:
    fields = {}
    if args.config:
        with open(args.config, "r", encoding="utf-8") as fh:
            fields = json.load(fh)
        for key in ("n_per_source", "base_rate", "signal_emit", "nuisance_emit", "source_names"):
            if key in fields:
                fields[key] = tuple(fields[key])
    if args.seed is not None:
        fields["seed"] = args.seed
    cfg = SynthConfig(**fields)
    corpus = generate_corpus(cfg)
    write_corpus(corpus, args.out)
    counts = corpus.cell_counts()
    print(f"wrote {len(corpus)} records to {args.out}")
    for (y, z), n in sorted(counts.items(), key=lambda kv: (kv[0][1], kv[0][0])):
        print(f"  source {corpus.source_names[z]!r} (z={z}) y={y}: {n}")
    return 0


def _cmd_sweep(args: argparse.Namespace) -> int:
    spec = load_sweep_spec(args.config)
    if args.seed is not None:
        spec = dataclasses.replace(spec, base_seed=args.seed)
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    rows, planned, skips = run_sweep(spec, jobs=args.jobs)
    write_rows(rows, out_dir / "rows.csv")
    write_skip_log(skips, out_dir / "skips.jsonl")
    print(
        f"{len(planned)} feasible settings, {len(skips)} skipped; "
        f"{len(rows)} rows -> {out_dir / 'rows.csv'}"
    )
    return 0


def _cmd_report(args: argparse.Namespace) -> int:
    rows = read_rows(args.rows)
    report = aggregate_report(rows, log_base=_LOG_BASES[args.log_base], slope_on=args.slope_on)
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    write_slope_reports(report.slopes, out_dir / "slopes.csv")
    write_plot_data(report.alpha_means, out_dir / "plot_data.jsonl")
    for warning in report.warnings:
        print(f"warning: {warning}", file=sys.stderr)
    for s in report.slopes:
        print(
            f"model={s.model} cy={s.cy} slope={s.slope:+.5f} "
            f"intercept={s.intercept:.5f} n={s.n_points} log_base={s.log_base}"
        )
    return 0


def _cmd_featurize(args: argparse.Namespace) -> int:
    corpus = _load_corpus_any_sources(args.corpus)
    try:
        table = load_embedding_table(args.embeddings)
        attach_embeddings(corpus, table)
    except EmbeddingTableError as exc:
        print(f"FAIL: {exc}")
        return 1
    print(f"OK: {len(corpus)} records covered, dim={table.dim}, pooling={table.pooling}")
    if not args.check_only:
        by_source: dict[int, int] = {0: 0, 1: 0}
        for rec in corpus:
            by_source[rec.z] += 1
        for z, n in by_source.items():
            if n:
                print(f"  source {corpus.source_names[z]!r}: {n} records")
        extra = len(table.rows) - len(corpus)
        if extra:
            print(f"  note: table has {extra} rows not present in the corpus")
    return 0


def main(argv: list[str] | None = None) -> int:
    args = _build_parser().parse_args(argv)
    handlers = {
        "synth": _cmd_synth,
        "sweep": _cmd_sweep,
        "report": _cmd_report,
        "featurize": _cmd_featurize,
    }
    return handlers[args.command](args)


if __name__ == "__main__":
    sys.exit(main())
