"""Command-line entry point.

Subcommands: validate, transcribe, judge, run, report, cache. Backend specs
live in the config file (too structured for flags); flags only override
seed, parallelism, and individual config keys.

Exit codes: 0 success, 1 configuration error, 2 run completed with failures
(nonempty failure ledger), 3 fatal I/O. Every error path prints one
machine-parseable line on stderr.
"""

from __future__ import annotations

import argparse
import datetime as _dt
import logging
import sys
from pathlib import Path

import speechjudge
from speechjudge.cache import ContentCache
from speechjudge.config import (
    RunConfig,
    apply_overrides,
    build_run_config,
    config_digest,
    load_config_doc,
)
from speechjudge.errors import SpeechJudgeError, ConfigError
from speechjudge.harness import run_pipeline, compute_cer_column, cached_transcript
from speechjudge.manifest import (
    ingest_manifest,
    validate_against_columns,
    with_score_column,
    write_manifest,
)
from speechjudge.report import REPORT_FORMATS, emit_report, report_from_json, render_text_table

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_FAILURES = 2
EXIT_IO = 3

log = logging.getLogger("speechjudge")


def _error_line(exc: BaseException) -> str:
    msg = str(exc).replace("\n", " ").replace('"', "'")
    return f'error kind={type(exc).__name__} msg="{msg}"'


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="speechjudge",
        description="Zero-shot speech assessment pipeline and evaluation harness.")
    parser.add_argument("--version", action="version",
                        version=f"speechjudge {speechjudge.__version__}")
    sub = parser.add_subparsers(dest="subcommand", required=True)

    def add_common(p, needs_config=True):
        p.add_argument("--config", required=needs_config,
                       help="path to the run config file (YAML or JSON)")
        p.add_argument("--set", dest="overrides", action="append", default=[],
                       metavar="KEY=VALUE",
                       help="override an existing config key (repeatable)")
        p.add_argument("--seed", type=int, default=None)
        p.add_argument("--parallelism", type=int, default=None)
        p.add_argument("-v", "--verbose", action="count", default=0)

    p = sub.add_parser("validate", help="ingest the manifest and print warnings")
    add_common(p)

    p = sub.add_parser("transcribe",
                       help="populate the transcript cache and write reversed "
                            "CER columns into a new manifest")
    add_common(p)
    p.add_argument("--out", required=True,
                   help="path for the manifest with the CER column added")

    p = sub.add_parser("judge", help="judge from cached transcripts only")
    add_common(p)

    p = sub.add_parser("run", help="full pipeline run with report emission")
    add_common(p)

    p = sub.add_parser("report", help="re-emit reports from a completed run directory")
    p.add_argument("--run-dir", required=True)
    p.add_argument("--formats", nargs="+", default=list(REPORT_FORMATS),
                   choices=REPORT_FORMATS)
    p.add_argument("-v", "--verbose", action="count", default=0)

    p = sub.add_parser("cache", help="inspect or purge the result cache")
    p.add_argument("action", choices=["stats", "purge"])
    p.add_argument("--config", default=None)
    p.add_argument("--cache-dir", default=None)
    p.add_argument("--set", dest="overrides", action="append", default=[])
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--parallelism", type=int, default=None)
    p.add_argument("-v", "--verbose", action="count", default=0)
    return parser


def _setup_logging(verbosity: int) -> None:
    level = (logging.WARNING, logging.INFO, logging.DEBUG)[min(verbosity, 2)]
    logging.basicConfig(level=level,
                        format="%(levelname)s %(name)s: %(message)s",
                        stream=sys.stderr, force=True)


def _load_run_config(args) -> RunConfig:
    doc = load_config_doc(args.config)
    doc = apply_overrides(doc, args.overrides)
    return build_run_config(doc, config_dir=Path(args.config).parent,
                            seed=args.seed, parallelism=args.parallelism)


def _cmd_validate(args) -> int:
    cfg = _load_run_config(args)
    manifest = ingest_manifest(cfg.manifest_path, cfg.manifest_format)
    warnings = validate_against_columns(manifest)
    for w in warnings:
        print(f"warning: {w}")
    print(f"ok: {len(manifest)} records, "
          f"{len(manifest.score_columns)} score columns, "
          f"{len(warnings)} warnings")
    return EXIT_OK


def _cmd_transcribe(args) -> int:
    cfg = _load_run_config(args)
    outcome = compute_cer_column(cfg)
    manifest = ingest_manifest(cfg.manifest_path, cfg.manifest_format)
    updated = with_score_column(manifest, outcome.column, outcome.reversed_cer)
    write_manifest(updated, args.out)
    for w in outcome.warnings:
        print(f"warning: {w}")
    print(f"transcribed: {len(outcome.reversed_cer)} CER values in column "
          f"'{outcome.column}', {len(outcome.failures)} failures")
    print(f"wrote: {args.out}")
    if outcome.failures:
        for f in outcome.failures:
            print(f"failed: {f.utterance_id} [{f.stage}] {f.reason}")
        return EXIT_FAILURES
    return EXIT_OK


def _cmd_judge(args) -> int:
    from speechjudge.judge import judge_text
    from speechjudge.errors import BackendUnavailable, JudgeUnparseable

    cfg = _load_run_config(args)
    if cfg.mode != "transcribe_then_judge":
        raise ConfigError("judge subcommand requires mode transcribe_then_judge")
    manifest = ingest_manifest(cfg.manifest_path, cfg.manifest_format)
    cache = ContentCache(cfg.cache_dir)
    judged = 0
    failed: list[str] = []
    for record in manifest.records:
        transcript = cached_transcript(cfg, manifest, record, cache)
        if transcript is None:
            failed.append(f"{record.id} [judge] transcript not cached")
            continue
        try:
            judge_text(cfg.judge_backend, cfg.template, transcript,
                       reference=record.reference_text, cache=cache)
            judged += 1
        except (BackendUnavailable, JudgeUnparseable) as e:
            failed.append(f"{record.id} [judge] {e}")
    print(f"judged: {judged}/{len(manifest)} from cached transcripts, "
          f"{len(failed)} failures")
    for line in failed:
        print(f"failed: {line}")
    return EXIT_FAILURES if failed else EXIT_OK


def _run_dir_for(cfg: RunConfig) -> Path:
    stamp = _dt.datetime.now().strftime("%Y%m%d-%H%M%S")
    return Path(cfg.output_dir) / f"{config_digest(cfg)}-{stamp}"


def _cmd_run(args) -> int:
    from speechjudge.figures import render_figures

    cfg = _load_run_config(args)
    report = run_pipeline(cfg)
    run_dir = _run_dir_for(cfg)
    written = emit_report(report, set(REPORT_FORMATS), run_dir)
    figures = render_figures(report, run_dir)

    print(f"config digest: {config_digest(cfg)}")
    print(f"records: {report.run_metadata['manifest_records']}")
    for p in report.pairs:
        lcc = "undef" if p.lcc is None else f"{p.lcc:.4f}"
        srcc = "undef" if p.srcc is None else f"{p.srcc:.4f}"
        print(f"pair {p.predictor} vs {p.target}: lcc={lcc} srcc={srcc} "
              f"n={p.n_pairs} dropped={p.n_dropped}")
    print(f"failures: {len(report.failures)}")
    print(f"report formats: {', '.join(sorted(written))} "
          f"+ {len(figures)} figures")
    # the run directory name carries the volatile timestamp
    print(f"run directory: {run_dir}")
    return EXIT_FAILURES if report.failures else EXIT_OK


def _cmd_report(args) -> int:
    from speechjudge.figures import render_figures

    run_dir = Path(args.run_dir)
    report_path = run_dir / "report.json"
    if not report_path.is_file():
        raise ConfigError(f"no report.json under {run_dir}")
    report = report_from_json(report_path)
    emit_report(report, set(args.formats), run_dir)
    figures = render_figures(report, run_dir)
    print(f"re-emitted {', '.join(sorted(args.formats))} "
          f"+ {len(figures)} figures in {run_dir}")
    if args.verbose:
        print(render_text_table(report), end="")
    return EXIT_OK


def _cmd_cache(args) -> int:
    if args.cache_dir:
        cache_dir = args.cache_dir
    elif args.config:
        cfg = _load_run_config(args)
        cache_dir = cfg.cache_dir
    else:
        raise ConfigError("cache subcommand needs --cache-dir or --config")
    cache = ContentCache(cache_dir)
    if args.action == "stats":
        n, size = cache.stats()
        print(f"cache {cache_dir}: {n} entries, {size} bytes")
    else:
        n = cache.purge()
        print(f"cache {cache_dir}: purged {n} entries")
    return EXIT_OK


_COMMANDS = {
    "validate": _cmd_validate,
    "transcribe": _cmd_transcribe,
    "judge": _cmd_judge,
    "run": _cmd_run,
    "report": _cmd_report,
    "cache": _cmd_cache,
}


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    _setup_logging(args.verbose)
    try:
        return _COMMANDS[args.subcommand](args)
    except SpeechJudgeError as e:
        print(_error_line(e), file=sys.stderr)
        return EXIT_CONFIG
    except OSError as e:
        print(_error_line(e), file=sys.stderr)
        return EXIT_IO


def entry() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entry()
