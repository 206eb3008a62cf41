"""Command-line entry point for the capital-control measures pipeline.

One binary with subcommands covering the whole workflow: ingest,
extract, build-train, evaluate, event-study, stats. Exit codes: 0 on
success, 1 on I/O failure, 2 on validation failure. Defaults come from an
optional key=value config file, overridden by environment variables for
credentials (CCM_API_KEY, CCM_API_BASE), overridden by explicit flags.
"""
from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

from . import aggregates, corpus, evaluation, eventstudy, extraction, finetune_data, taxonomy

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_IO = 1
EXIT_VALIDATION = 2

ENV_API_KEY = "CCM_API_KEY"
ENV_API_BASE = "CCM_API_BASE"

_CONFIG_INT_KEYS = {"window", "seed", "max_parallel", "retry_budget", "year"}
_CONFIG_FLOAT_KEYS = {"rpm"}


class CliError(Exception):
    def __init__(self, message: str, code: int = EXIT_VALIDATION):
        super().__init__(message)
        self.code = code


def _require_file(path: str, what: str) -> Path:
    p = Path(path)
    if not p.is_file():
        raise CliError(f"{what} not found: {p}")
    return p


def _out_dir(path: str) -> Path:
    p = Path(path)
    try:
        p.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise CliError(f"cannot create output directory {p}: {exc}", EXIT_IO) from exc
    if not os.access(p, os.W_OK):
        raise CliError(f"output directory {p} is not writable")
    return p


def _load_config_file(path: str) -> dict:
    """Key=value per line; '#' starts a comment; keys match flag names."""
    values: dict = {}
    with open(_require_file(path, "config file"), encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            text = line.split("#", 1)[0].strip()
            if not text:
                continue
            if "=" not in text:
                raise CliError(f"{path}:{lineno}: expected key=value, got {text!r}")
            key, _, value = text.partition("=")
            key = key.strip().replace("-", "_")
            value = value.strip()
            if key in _CONFIG_INT_KEYS:
                values[key] = int(value)
            elif key in _CONFIG_FLOAT_KEYS:
                values[key] = float(value)
            else:
                values[key] = value
    return values


# --- ingest -----------------------------------------------------------------


def _ingest_files(paths, ingest_fn, default_year):
    entries = []
    rejects = []
    for raw in paths:
        path = _require_file(raw, "input file")
        result = ingest_fn(path, year=default_year)
        entries.extend(result.entries)
        for reject in result.rejects:
            record = reject.to_json()
            record["file"] = str(path)
            rejects.append(record)
    return entries, rejects


def _report_to_json(entry: corpus.ReportEntry) -> dict:
    return {
        "year": entry.year,
        "country": entry.country,
        "index": entry.index,
        "category": entry.category,
        "code": entry.code,
        "status": entry.status,
        "description": entry.description,
    }


def _change_to_json(entry: corpus.ChangeEntry) -> dict:
    return {
        "year": entry.year,
        "country": entry.country,
        "index": entry.index,
        "category": entry.category,
        "effective_date": entry.effective_date.isoformat() if entry.effective_date else None,
        "description": entry.description,
    }


def _write_jsonl(records, path) -> int:
    count = 0
    with open(path, "w", encoding="utf-8") as fh:
        for record in records:
            fh.write(json.dumps(record, ensure_ascii=False) + "\n")
            count += 1
    return count


def cmd_ingest(args) -> int:
    if args.meta:
        corpus.load_country_meta(_require_file(args.meta, "country metadata file"))
    if not args.reports and not args.changes:
        raise CliError("nothing to ingest: give --reports and/or --changes")
    reports, report_rejects = _ingest_files(args.reports or [], corpus.ingest_final_report, args.year)
    changes, change_rejects = _ingest_files(args.changes or [], corpus.ingest_yearly_changes, args.year)
    merged = corpus.merge_corpus(reports, changes)

    out = _out_dir(args.out)
    _write_jsonl((_report_to_json(e) for e in merged.all_reports()), out / "reports.jsonl")
    _write_jsonl((_change_to_json(e) for e in merged.all_changes()), out / "changes.jsonl")
    rejects = report_rejects + change_rejects
    _write_jsonl(rejects, out / "rejects.jsonl")
    corpus.corpus_stats(merged).to_csv(out / "corpus_stats.csv", index=False)
    print(
        f"ingested {len(reports)} report rows, {len(changes)} change rows, "
        f"{len(rejects)} rejects -> {out}",
        file=sys.stderr,
    )
    return EXIT_OK


# --- extract ----------------------------------------------------------------


def _load_corpus_dir(corpus_dir: str) -> corpus.Corpus:
    base = Path(corpus_dir)
    reports_path = base / "reports.jsonl"
    changes_path = base / "changes.jsonl"
    if not reports_path.is_file() and not changes_path.is_file():
        raise CliError(f"no corpus store in {base} (expected reports.jsonl/changes.jsonl)")
    reports = corpus.ingest_final_report(reports_path).entries if reports_path.is_file() else []
    changes = corpus.ingest_yearly_changes(changes_path).entries if changes_path.is_file() else []
    return corpus.merge_corpus(reports, changes)


def _done_entry_ids(*paths: Path) -> set[str]:
    done: set[str] = set()
    for path in paths:
        if not path.is_file():
            continue
        with open(path, encoding="utf-8") as fh:
            for line in fh:
                text = line.strip()
                if not text:
                    continue
                try:
                    record = json.loads(text)
                except json.JSONDecodeError:
                    continue
                if isinstance(record, dict) and record.get("entry_id"):
                    done.add(record["entry_id"])
    return done


def cmd_extract(args) -> int:
    merged = _load_corpus_dir(args.corpus)
    metas = corpus.load_country_meta(_require_file(args.meta, "country metadata file")) if args.meta else {}

    entries: list = []
    if args.source in ("changes", "both"):
        entries.extend(merged.all_changes())
    if args.source in ("reports", "both"):
        entries.extend(merged.all_reports())

    if args.mock:
        backend = extraction.MockChatBackend()
    else:
        api_key = os.environ.get(ENV_API_KEY)
        api_base = os.environ.get(ENV_API_BASE)
        if not api_key or not api_base:
            raise CliError(
                f"set {ENV_API_KEY} and {ENV_API_BASE} for a live backend, or pass --mock"
            )
        backend = extraction.HttpChatBackend(
            api_base, api_key, requests_per_minute=args.rpm
        )

    config = extraction.ExtractionConfig(
        model=args.model,
        max_parallel=args.max_parallel,
        retry_budget=args.retry_budget,
        requests_per_minute=args.rpm,
    )

    out = _out_dir(args.out)
    events_path = out / "events.jsonl"
    failures_path = out / "failures.jsonl"
    mode = "a" if args.resume else "w"
    if args.resume:
        done = _done_entry_ids(events_path, failures_path)
        before = len(entries)
        entries = [e for e in entries if extraction.entry_id(e) not in done]
        print(f"resume: skipping {before - len(entries)} already-processed entries", file=sys.stderr)

    total = len(entries)

    def _progress(done_count: int, _total: int) -> None:
        if done_count % 25 == 0 or done_count == total:
            print(f"extracted {done_count}/{total}", file=sys.stderr)

    with open(events_path, mode, encoding="utf-8") as events_sink, open(
        failures_path, mode, encoding="utf-8"
    ) as failures_sink:
        result = extraction.run_batch(
            entries,
            metas,
            config,
            backend,
            events_sink=events_sink,
            failures_sink=failures_sink,
            progress=_progress,
        )
    print(
        f"{len(result.events)} events, {len(result.failures)} failures -> {events_path}",
        file=sys.stderr,
    )
    return EXIT_OK


# --- build-train ------------------------------------------------------------


def _parse_split(text: str) -> tuple[int, int, int]:
    parts = text.split(",")
    if len(parts) != 3:
        raise CliError(f"--split expects train,validation,test sizes, got {text!r}")
    try:
        train, val, test = (int(p) for p in parts)
    except ValueError as exc:
        raise CliError(f"--split sizes must be integers: {exc}") from exc
    return train, val, test


def cmd_build_train(args) -> int:
    merged = _load_corpus_dir(args.corpus)
    metas = corpus.load_country_meta(_require_file(args.meta, "country metadata file")) if args.meta else {}
    tax = taxonomy.load_taxonomy(args.taxonomy) if args.taxonomy else taxonomy.load_taxonomy()

    report_pairs = finetune_data.build_final_report_pairs(merged)
    change_pairs, skips = finetune_data.build_change_pairs(merged)
    pairs = report_pairs + change_pairs
    try:
        examples = finetune_data.to_chat_examples(pairs, tax)
    except taxonomy.UnknownIndexError as exc:
        raise CliError(str(exc)) from exc

    train_size, val_size, test_size = _parse_split(args.split)
    spec = finetune_data.SplitSpec(train_size, val_size, test_size, seed=args.seed)
    try:
        train, validation, test = finetune_data.split_dataset(examples, spec)
    except ValueError as exc:
        raise CliError(str(exc)) from exc

    out = _out_dir(args.out)
    finetune_data.write_chat_jsonl(train, out / "train.jsonl")
    finetune_data.write_chat_jsonl(validation, out / "validation.jsonl")
    finetune_data.write_chat_jsonl(test, out / "test.jsonl")
    finetune_data.write_skip_log(skips, out / "skips.jsonl")
    with open(out / "composition.json", "w", encoding="utf-8") as fh:
        json.dump(
            {
                "total": len(examples),
                "train": len(train),
                "validation": len(validation),
                "test": len(test),
                "test_composition": finetune_data.split_composition(test),
                "seed": args.seed,
            },
            fh,
            indent=2,
            sort_keys=True,
        )
        fh.write("\n")
    for name, frame in finetune_data.dataset_distribution(pairs, metas).items():
        frame.to_csv(out / f"dist_{name}.csv", index=False)
    print(
        f"{len(train)}/{len(validation)}/{len(test)} examples, {len(skips)} skips -> {out}",
        file=sys.stderr,
    )
    return EXIT_OK


# --- evaluate ---------------------------------------------------------------


def cmd_evaluate(args) -> int:
    records = []
    for raw in args.predictions:
        path = _require_file(raw, "predictions file")
        try:
            records.extend(evaluation.load_predictions(path))
        except evaluation.PredictionFormatError as exc:
            raise CliError(f"{path}: {exc}") from exc
    try:
        table = evaluation.build_report(records, focal_model=args.focal_model)
    except ValueError as exc:
        raise CliError(str(exc)) from exc
    print(evaluation.render_report_text(table), end="")
    if args.out:
        out = _out_dir(args.out)
        import pandas as pd

        pd.DataFrame(evaluation.report_rows(table)).to_csv(out / "report.csv", index=False)
        print(f"report -> {out / 'report.csv'}", file=sys.stderr)
    return EXIT_OK


# --- event-study ------------------------------------------------------------


def _read_events_file(path: Path) -> list[dict]:
    events = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            text = line.strip()
            if not text:
                continue
            try:
                record = json.loads(text)
            except json.JSONDecodeError as exc:
                raise CliError(f"{path}: line {lineno}: invalid JSON: {exc}") from exc
            if not isinstance(record, dict):
                raise CliError(f"{path}: line {lineno}: expected a JSON object")
            events.append(record)
    return events


def cmd_event_study(args) -> int:
    events_raw = _read_events_file(_require_file(args.events, "events file"))
    holdings = eventstudy.load_holdings(_require_file(args.holdings, "holdings file"))
    countries = [c.strip() for c in args.countries.split(",")] if args.countries else None

    # The regression absorbs fund and month effects, so the panel is built
    # per fund; both cluster levels then run on the same frame.
    panel = eventstudy.compute_fund_flows(holdings, flow_def=args.flow_def)
    events = eventstudy.select_events(events_raw, countries=countries)
    if not events:
        raise CliError("no inward liberalizing/restrictive events to study")
    frame, report = eventstudy.build_event_frame(
        panel, events, window=args.window, overlap=args.overlap
    )
    try:
        result = eventstudy.estimate_event_study(
            frame, cluster_level=args.cluster, window=args.window
        )
    except eventstudy.EventStudyError as exc:
        raise CliError(str(exc)) from exc

    out = _out_dir(args.out)
    eventstudy.coefficients_frame(result).to_csv(out / "coefficients.csv", index=False)
    eventstudy.means_frame(result.means).to_csv(out / "means.csv", index=False)
    summary = ", ".join(f"group {g}: {n} events" for g, n in sorted(result.n_events.items()))
    print(
        f"{summary}; {report.emitted} rows emitted, {report.missing} missing, "
        f"{len(report.dropped_events)} events dropped; cluster={result.cluster_level} -> {out}",
        file=sys.stderr,
    )
    return EXIT_OK


# --- stats ------------------------------------------------------------------


def cmd_stats(args) -> int:
    events = _read_events_file(_require_file(args.events, "events file"))
    out = _out_dir(args.out)
    tables = {
        "by_year_category": aggregates.events_by_year_category(events),
        "by_year_region": aggregates.events_by_year_region(events),
        "cumulative_actions": aggregates.cumulative_by_action(events),
        "intensity_by_income": aggregates.intensity_by_income(events),
        "direction_by_income": aggregates.direction_by_income(events),
    }
    for name, frame in tables.items():
        frame.to_csv(out / f"{name}.csv", index=False)
    print(f"{len(events)} events -> {len(tables)} tables in {out}", file=sys.stderr)
    return EXIT_OK


# --- parser -----------------------------------------------------------------


def build_parser(config_defaults: dict | None = None) -> argparse.ArgumentParser:
    """Build the argument parser, seeding config-file values as defaults.

    Defaults are installed on every subparser (subcommands parse into a
    fresh namespace, so top-level set_defaults would not reach them);
    explicit flags always win.
    """
    parser = argparse.ArgumentParser(
        prog="ccm",
        description="Capital control measures pipeline: ingest, extract, build-train, "
        "evaluate, event-study, stats.",
    )
    parser.add_argument("--config", help="key=value config file (flags override it)")
    parser.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    subparsers = []
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", help="ingest report/change files into a corpus store")
    subparsers.append(p)
    p.add_argument("--reports", nargs="*", default=[], help="final-report JSONL/CSV files")
    p.add_argument("--changes", nargs="*", default=[], help="yearly-change JSONL/CSV files")
    p.add_argument("--meta", help="country metadata CSV (validated if given)")
    p.add_argument("--year", type=int, help="default year for rows without one")
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("extract", help="extract structured events via a chat backend")
    subparsers.append(p)
    p.add_argument("--corpus", required=True, help="corpus store directory (from ingest)")
    p.add_argument("--meta", help="country metadata CSV")
    p.add_argument("--source", choices=("changes", "reports", "both"), default="changes",
                   help="which corpus entries to extract (default: changes)")
    p.add_argument("--mock", action="store_true", help="use the deterministic mock backend")
    p.add_argument("--resume", action="store_true",
                   help="skip entries whose ids are already in the output")
    p.add_argument("--model", default="ccm-extractor", help="backend model identifier")
    p.add_argument("--max-parallel", type=int, default=4, help="in-flight request cap")
    p.add_argument("--retry-budget", type=int, default=2, help="re-asks per entry")
    p.add_argument("--rpm", type=float, default=None, help="requests per minute limit")
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_extract)

    p = sub.add_parser("build-train", help="build the finetuning dataset from a corpus store")
    subparsers.append(p)
    p.add_argument("--corpus", required=True, help="corpus store directory (from ingest)")
    p.add_argument("--meta", help="country metadata CSV (for distribution tables)")
    p.add_argument("--taxonomy", help="category table override CSV")
    p.add_argument("--split", required=True, help="train,validation,test sizes (must sum to total)")
    p.add_argument("--seed", type=int, default=0, help="split sampling seed")
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_build_train)

    p = sub.add_parser("evaluate", help="score prediction files and render the report")
    subparsers.append(p)
    p.add_argument("--predictions", nargs="+", required=True, help="predictions JSONL files")
    p.add_argument("--focal-model", help="model the delta row is computed for")
    p.add_argument("--out", help="output directory for report.csv")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("event-study", help="fund-flow event study around policy events")
    subparsers.append(p)
    p.add_argument("--events", required=True, help="events JSONL (from extract)")
    p.add_argument("--holdings", required=True, help="fund holdings CSV")
    p.add_argument("--countries", help="comma-separated country filter")
    p.add_argument("--cluster", choices=("fund", "country"), default="country",
                   help="standard-error clustering level (default: country)")
    p.add_argument("--flow-def", choices=("delta", "level"), default="delta",
                   help="flow percentage definition (default: delta)")
    p.add_argument("--overlap", choices=("saturate", "drop"), default="saturate",
                   help="overlapping-window policy (default: saturate)")
    p.add_argument("--window", type=int, default=6, help="months each side of the event")
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_event_study)

    p = sub.add_parser("stats", help="stylized-fact CSVs from an events file")
    subparsers.append(p)
    p.add_argument("--events", required=True, help="events JSONL (from extract)")
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_stats)

    if config_defaults:
        parser.set_defaults(**config_defaults)
        for sub_parser in subparsers:
            sub_parser.set_defaults(**config_defaults)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    preliminary, _ = parser.parse_known_args(argv)
    if getattr(preliminary, "config", None):
        try:
            parser = build_parser(_load_config_file(preliminary.config))
        except CliError as exc:
            print(f"error: {exc}", file=sys.stderr)
            return exc.code
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )
    try:
        return args.func(args)
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.code
    except (corpus.IngestionError, OSError) as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (
        taxonomy.TaxonomyError,
        evaluation.PredictionFormatError,
        eventstudy.EventStudyError,
        extraction.ExtractionError,
        ValueError,
    ) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION


if __name__ == "__main__":
    sys.exit(main())
