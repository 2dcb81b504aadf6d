"""Run orchestration: per-utterance work items, series assembly, reports.

Per-utterance results are deposited in the content cache as they complete,
so an interrupted run resumes from where it stopped with zero repeated
backend calls. Work items run under a bounded thread pool; series are
assembled in manifest order, so completion order never affects the report.
"""

from __future__ import annotations

import datetime as _dt
import logging
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import speechjudge
from speechjudge.asr import (
    NORMALIZATION_NOTE,
    Transcript,
    normalize_text,
    transcribe,
    transcribe_cache_key_parts,
    audio_digest,
)
from speechjudge.cache import ContentCache
from speechjudge.config import JUDGE_COLUMN, RunConfig, config_digest
from speechjudge.errors import (
    BackendUnavailable,
    ConfigError,
    DegenerateSeries,
    EmptyReference,
    JudgeUnparseable,
)
from speechjudge.judge import judge_audio, judge_text
from speechjudge.manifest import (
    Manifest,
    UtteranceRecord,
    ingest_manifest,
    iter_target_values,
)
from speechjudge.metrics import (
    Histogram,
    PairedSeries,
    cer,
    equal_width_edges,
    histogram,
    pearson,
    reverse_cer,
    spearman,
)

log = logging.getLogger(__name__)

HISTOGRAM_BINS = 20

# Metadata keys that vary between otherwise identical runs. The JSON report
# omits them so reruns are byte-identical; the text report prints them.
VOLATILE_METADATA_KEYS = ("started_at", "finished_at", "elapsed_seconds")

KNOWN_RANGES = {
    "quality_mos": (0.0, 5.0),
    "intelligibility": (0.0, 1.0),
    JUDGE_COLUMN: (0.0, 1.0),
}


@dataclass(frozen=True)
class PairEntry:
    """Correlation outcome for one (predictor, target) combination."""

    predictor: str
    target: str
    lcc: float | None
    srcc: float | None
    n_pairs: int
    n_dropped: int


@dataclass(frozen=True)
class FailureEntry:
    utterance_id: str
    stage: str      # "asr" | "judge"
    reason: str


@dataclass
class EvaluationReport:
    run_metadata: dict
    pairs: list[PairEntry] = field(default_factory=list)
    histograms: dict = field(default_factory=dict)  # name -> Histogram
    failures: list[FailureEntry] = field(default_factory=list)


def declared_range(name: str, cfg: RunConfig) -> tuple[float, float]:
    """Histogram range for a variable: known labels, config override, or the
    0-1 default used by CER-like and normalized columns."""
    if name in cfg.column_ranges:
        return cfg.column_ranges[name]
    if name in KNOWN_RANGES:
        return KNOWN_RANGES[name]
    return (0.0, 1.0)


def _resolved_record(manifest: Manifest,
                     record: UtteranceRecord) -> UtteranceRecord:
    audio = manifest.resolve_audio_path(record)
    return UtteranceRecord(
        id=record.id, audio_path=str(audio),
        reference_text=record.reference_text,
        quality_mos=record.quality_mos,
        intelligibility=record.intelligibility,
        condition=record.condition,
        external_scores=record.external_scores)


def run_pipeline(cfg: RunConfig) -> EvaluationReport:
    """Execute the configured run and assemble the evaluation report.

    Aborts only on configuration errors; per-utterance backend failures go
    to the failure ledger and their pairs are dropped with accounting.
    """
    started = time.time()
    manifest = ingest_manifest(cfg.manifest_path, cfg.manifest_format)
    cache = ContentCache(cfg.cache_dir)

    failures: list[FailureEntry] = []
    judge_scores: dict[str, float] = {}

    def work(record: UtteranceRecord):
        resolved = _resolved_record(manifest, record)
        try:
            if cfg.mode == "audio_direct":
                result = judge_audio(cfg.judge_backend, cfg.template,
                                     resolved, cache=cache)
            else:
                try:
                    transcript = transcribe(cfg.asr_backend, resolved,
                                            cache=cache)
                except BackendUnavailable as e:
                    return record.id, None, FailureEntry(record.id, "asr",
                                                         str(e))
                result = judge_text(cfg.judge_backend, cfg.template,
                                    transcript,
                                    reference=record.reference_text,
                                    cache=cache)
            return record.id, result, None
        except JudgeUnparseable as e:
            return record.id, None, FailureEntry(record.id, "judge",
                                                 f"unparseable: {e}")
        except BackendUnavailable as e:
            return record.id, None, FailureEntry(record.id, "judge", str(e))

    with ThreadPoolExecutor(max_workers=cfg.parallelism) as pool:
        outcomes = list(pool.map(work, manifest.records))

    live_results = 0
    for uid, result, failure in outcomes:
        if failure is not None:
            failures.append(failure)
            continue
        if result.normalized_score is not None:
            judge_scores[uid] = result.normalized_score
        if not result.from_cache:
            live_results += 1
    log.info("judged %d/%d utterances (%d fresh, %d failed)",
             len(judge_scores), len(manifest), live_results, len(failures))

    report = assemble_report(cfg, manifest, judge_scores, failures)
    report.run_metadata["started_at"] = _dt.datetime.fromtimestamp(
        started, _dt.timezone.utc).isoformat()
    report.run_metadata["finished_at"] = _dt.datetime.now(
        _dt.timezone.utc).isoformat()
    report.run_metadata["elapsed_seconds"] = round(time.time() - started, 3)
    return report


def assemble_report(cfg: RunConfig, manifest: Manifest,
                    judge_scores: dict[str, float],
                    failures: list[FailureEntry]) -> EvaluationReport:
    """Correlations for every (predictor, target) pair plus histograms."""
    n = len(manifest)
    predictor_values: dict[str, dict[str, float]] = {JUDGE_COLUMN: judge_scores}
    for col in cfg.extra_predictors:
        predictor_values[col] = {uid: v for uid, v
                                 in iter_target_values(manifest, col)
                                 if v is not None}
    target_values: dict[str, dict[str, float]] = {}
    for col in cfg.targets:
        target_values[col] = {uid: v for uid, v
                              in iter_target_values(manifest, col)
                              if v is not None}

    pairs: list[PairEntry] = []
    for pname, pvals in predictor_values.items():
        for tname, tvals in target_values.items():
            aligned = tuple(
                (pvals[r.id], tvals[r.id]) for r in manifest.records
                if r.id in pvals and r.id in tvals)
            series = PairedSeries(pname, tname, aligned,
                                  dropped_count=n - len(aligned))
            try:
                lcc = pearson(series)
            except DegenerateSeries:
                lcc = None
            try:
                srcc = spearman(series)
            except DegenerateSeries:
                srcc = None
            pairs.append(PairEntry(pname, tname, lcc, srcc,
                                   n_pairs=len(aligned),
                                   n_dropped=series.dropped_count))

    histograms: dict[str, Histogram] = {}
    for name, values in {**predictor_values, **target_values}.items():
        lo, hi = declared_range(name, cfg)
        ordered = [values[r.id] for r in manifest.records if r.id in values]
        histograms[name] = histogram(ordered,
                                     equal_width_edges(lo, hi, HISTOGRAM_BINS))

    metadata = {
        "tool_version": speechjudge.__version__,
        "config_digest": config_digest(cfg),
        "mode": cfg.mode,
        "seed": cfg.seed,
        "parallelism": cfg.parallelism,
        "manifest_path": str(cfg.manifest_path),
        "manifest_records": n,
        "targets": list(cfg.targets),
        "extra_predictors": list(cfg.extra_predictors),
        "judge_column": JUDGE_COLUMN,
        "normalization": NORMALIZATION_NOTE,
        "template": {
            "template_id": cfg.template.template_id,
            "target": cfg.template.target,
            "body": cfg.template.body,
            "scale": [cfg.template.scale_min, cfg.template.scale_max],
            "instruction_language": cfg.template.instruction_language,
        },
        "judge_backend": {
            "backend_id": cfg.judge_backend.backend_id,
            "kind": cfg.judge_backend.kind,
            "model_name": cfg.judge_backend.model_name,
            "endpoint": cfg.judge_backend.endpoint,
            "temperature": cfg.judge_backend.temperature,
            "max_attempts": cfg.judge_backend.max_attempts,
            "audio_capable": cfg.judge_backend.audio_capable,
            "api_key_env": cfg.judge_backend.api_key_env,
            "params": dict(cfg.judge_backend.params),
        },
        "asr_backend": None if cfg.asr_backend is None else {
            "backend_id": cfg.asr_backend.backend_id,
            "kind": cfg.asr_backend.kind,
            "endpoint_or_template": cfg.asr_backend.endpoint_or_template,
            "language_hint": cfg.asr_backend.language_hint,
            "params": dict(cfg.asr_backend.params),
        },
        "failure_count": len(failures),
    }
    return EvaluationReport(run_metadata=metadata, pairs=pairs,
                            histograms=histograms, failures=list(failures))


# --- ground-truth transcription (CER columns) -------------------------------

@dataclass
class TranscribeOutcome:
    """Result of the CER-column population pass."""

    column: str
    reversed_cer: dict[str, float]
    warnings: list[str]
    failures: list[FailureEntry]


def compute_cer_column(cfg: RunConfig) -> TranscribeOutcome:
    """Transcribe every utterance and compute reversed CER against the
    reference, for writing into an external score column.

    Utterances without a usable reference get a warning and no value;
    backend failures land in the ledger. Transcripts are left in the cache,
    so a later judge pass replays them for free.
    """
    if cfg.asr_backend is None:
        raise ConfigError("transcribe requires an asr_backend in the config")
    manifest = ingest_manifest(cfg.manifest_path, cfg.manifest_format)
    cache = ContentCache(cfg.cache_dir)
    column = cfg.cer_column or f"cer_{cfg.asr_backend.backend_id}_reversed"

    warnings: list[str] = []
    failures: list[FailureEntry] = []
    values: dict[str, float] = {}

    def work(record: UtteranceRecord):
        resolved = _resolved_record(manifest, record)
        try:
            return record.id, transcribe(cfg.asr_backend, resolved,
                                          cache=cache), None
        except BackendUnavailable as e:
            return record.id, None, FailureEntry(record.id, "asr", str(e))

    with ThreadPoolExecutor(max_workers=cfg.parallelism) as pool:
        outcomes = list(pool.map(work, manifest.records))

    by_id = {r.id: r for r in manifest.records}
    for uid, transcript, failure in outcomes:
        if failure is not None:
            failures.append(failure)
            continue
        reference = by_id[uid].reference_text
        if reference is None:
            warnings.append(f"record {uid}: no reference_text, skipping CER")
            continue
        try:
            values[uid] = reverse_cer(cer(normalize_text(reference),
                                          transcript.normalized_text))
        except EmptyReference:
            warnings.append(f"record {uid}: reference empty after "
                            f"normalization, skipping CER")
    return TranscribeOutcome(column=column, reversed_cer=values,
                             warnings=warnings, failures=failures)


def cached_transcript(cfg: RunConfig, manifest: Manifest,
                      record: UtteranceRecord,
                      cache: ContentCache) -> Transcript | None:
    """Transcript from the cache only; None when it was never deposited."""
    if cfg.asr_backend is None:
        return None
    audio = manifest.resolve_audio_path(record)
    if not audio.is_file():
        return None
    digest = audio_digest(audio)
    key = cache.key(*transcribe_cache_key_parts(cfg.asr_backend, digest,
                                                record.id))
    hit = cache.get(key)
    return None if hit is None else Transcript.from_record(hit, from_cache=True)
