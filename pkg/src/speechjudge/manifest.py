"""Domain types and manifest ingestion shared by all other modules.

Two on-disk formats carry the same schema:

* JSON-lines (canonical): one record object per line, snake_case field names.
  An optional first line ``{"score_columns": [...]}`` declares the external
  score columns; without it the columns are derived from the records in
  first-seen order. Serialization always writes the header so that a
  manifest round-trips field-for-field.
* CSV with a header row: fixed columns ``id, audio_path, reference_text,
  quality_mos, intelligibility, noise_type, snr_db, system`` (condition
  fields flattened); every other header column is a declared external score
  column. Absent values are empty cells.

Labels outside their declared ranges are hard errors, never clamped: silent
clamping would corrupt correlation studies downstream.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path
from types import MappingProxyType
from typing import Iterable, Mapping

from speechjudge.errors import ManifestFormatError, ManifestValidationError

FIXED_CSV_COLUMNS = ("id", "audio_path", "reference_text", "quality_mos",
                     "intelligibility", "noise_type", "snr_db", "system")

_RECORD_KEYS = {"id", "audio_path", "reference_text", "quality_mos",
                "intelligibility", "condition", "external_scores"}
_CONDITION_KEYS = {"noise_type", "snr_db", "system"}


@dataclass(frozen=True)
class ConditionMeta:
    """Free-form condition tags; nonempty when present."""

    noise_type: str | None = None
    snr_db: float | None = None
    system: str | None = None


@dataclass(frozen=True)
class UtteranceRecord:
    """One evaluation item: audio handle, reference transcript, labels."""

    id: str
    audio_path: str
    reference_text: str | None = None
    quality_mos: float | None = None
    intelligibility: float | None = None
    condition: ConditionMeta = field(default_factory=ConditionMeta)
    external_scores: Mapping[str, float] = field(default_factory=dict)

    def __post_init__(self):
        # freeze the mapping so records are safely shareable
        object.__setattr__(self, "external_scores",
                           MappingProxyType(dict(self.external_scores)))

    def __eq__(self, other):
        if not isinstance(other, UtteranceRecord):
            return NotImplemented
        return (self.id, self.audio_path, self.reference_text,
                self.quality_mos, self.intelligibility, self.condition,
                dict(self.external_scores)) == \
               (other.id, other.audio_path, other.reference_text,
                other.quality_mos, other.intelligibility, other.condition,
                dict(other.external_scores))

    __hash__ = None


@dataclass(frozen=True)
class Manifest:
    """Ordered records plus declared score columns; immutable after ingestion."""

    records: tuple[UtteranceRecord, ...]
    score_columns: tuple[str, ...]
    source_path: str = ""

    def __len__(self) -> int:
        return len(self.records)

    def resolve_audio_path(self, record: UtteranceRecord) -> Path:
        """Relative audio paths resolve against the manifest's directory."""
        p = Path(record.audio_path)
        if p.is_absolute() or not self.source_path:
            return p
        return Path(self.source_path).parent / p


def _parse_optional_float(raw, what: str, line_no: int) -> float | None:
    if raw is None or raw == "":
        return None
    try:
        return float(raw)
    except (TypeError, ValueError):
        raise ManifestFormatError(f"{what} is not a number: {raw!r}", line_no)


def _record_from_json(obj: dict, line_no: int) -> UtteranceRecord:
    unknown = set(obj) - _RECORD_KEYS
    if unknown:
        raise ManifestFormatError(
            f"unknown record field(s): {', '.join(sorted(unknown))}", line_no)
    if "id" not in obj or "audio_path" not in obj:
        raise ManifestFormatError("record needs 'id' and 'audio_path'", line_no)
    cond_obj = obj.get("condition") or {}
    if not isinstance(cond_obj, dict):
        raise ManifestFormatError("'condition' must be an object", line_no)
    unknown = set(cond_obj) - _CONDITION_KEYS
    if unknown:
        raise ManifestFormatError(
            f"unknown condition field(s): {', '.join(sorted(unknown))}", line_no)
    scores_obj = obj.get("external_scores") or {}
    if not isinstance(scores_obj, dict):
        raise ManifestFormatError("'external_scores' must be an object", line_no)
    scores = {str(k): _parse_optional_float(v, f"external_scores[{k}]", line_no)
              for k, v in scores_obj.items()}
    if any(v is None for v in scores.values()):
        raise ManifestFormatError("external_scores values must be numbers", line_no)
    return UtteranceRecord(
        id=str(obj["id"]),
        audio_path=str(obj["audio_path"]),
        reference_text=(None if obj.get("reference_text") is None
                        else str(obj["reference_text"])),
        quality_mos=_parse_optional_float(obj.get("quality_mos"),
                                          "quality_mos", line_no),
        intelligibility=_parse_optional_float(obj.get("intelligibility"),
                                              "intelligibility", line_no),
        condition=ConditionMeta(
            noise_type=(None if cond_obj.get("noise_type") is None
                        else str(cond_obj["noise_type"])),
            snr_db=_parse_optional_float(cond_obj.get("snr_db"),
                                         "condition.snr_db", line_no),
            system=(None if cond_obj.get("system") is None
                    else str(cond_obj["system"])),
        ),
        external_scores=scores,
    )


def _read_jsonl(path: Path) -> tuple[list[UtteranceRecord], list[str] | None]:
    records: list[UtteranceRecord] = []
    declared: list[str] | None = None
    with open(path, encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as e:
                raise ManifestFormatError(f"invalid JSON: {e.msg}", line_no)
            if not isinstance(obj, dict):
                raise ManifestFormatError("each line must be a JSON object", line_no)
            if line_no == 1 and "score_columns" in obj and "id" not in obj:
                cols = obj["score_columns"]
                if (not isinstance(cols, list)
                        or any(not isinstance(c, str) for c in cols)):
                    raise ManifestFormatError(
                        "score_columns header must be a list of strings", line_no)
                declared = list(cols)
                continue
            records.append(_record_from_json(obj, line_no))
    return records, declared


def _read_csv(path: Path) -> tuple[list[UtteranceRecord], list[str] | None]:
    records: list[UtteranceRecord] = []
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None:
            raise ManifestFormatError("missing CSV header", 1)
        missing = [c for c in ("id", "audio_path") if c not in reader.fieldnames]
        if missing:
            raise ManifestFormatError(
                f"CSV header lacks required column(s): {', '.join(missing)}", 1)
        score_cols = [c for c in reader.fieldnames if c not in FIXED_CSV_COLUMNS]
        for row in reader:
            line_no = reader.line_num
            if row.get(None):
                raise ManifestFormatError("row has more cells than the header", line_no)

            def cell(name):
                v = row.get(name)
                return None if v is None or v == "" else v

            scores = {}
            for c in score_cols:
                v = cell(c)
                if v is not None:
                    scores[c] = _parse_optional_float(v, f"column {c}", line_no)
            records.append(UtteranceRecord(
                id=cell("id") or "",
                audio_path=cell("audio_path") or "",
                reference_text=cell("reference_text"),
                quality_mos=_parse_optional_float(cell("quality_mos"),
                                                  "quality_mos", line_no),
                intelligibility=_parse_optional_float(cell("intelligibility"),
                                                      "intelligibility", line_no),
                condition=ConditionMeta(
                    noise_type=cell("noise_type"),
                    snr_db=_parse_optional_float(cell("snr_db"),
                                                 "snr_db", line_no),
                    system=cell("system"),
                ),
                external_scores=scores,
            ))
    return records, score_cols


def _validate(records: list[UtteranceRecord],
              declared: list[str] | None) -> None:
    """Collect every invariant violation; raise once, naming all ids."""
    problems: list[str] = []
    bad_ids: list[str] = []

    def flag(record_id: str, message: str):
        problems.append(message)
        bad_ids.append(record_id)

    seen: set[str] = set()
    for r in records:
        if not r.id:
            flag(r.id, "record with empty id")
        elif r.id in seen:
            flag(r.id, f"duplicate id {r.id}")
        seen.add(r.id)
        if not r.audio_path:
            flag(r.id, f"record {r.id}: empty audio_path")
        if r.quality_mos is not None and not (0.0 <= r.quality_mos <= 5.0):
            flag(r.id, f"record {r.id}: quality_mos {r.quality_mos} outside [0, 5]")
        if r.intelligibility is not None and not (0.0 <= r.intelligibility <= 1.0):
            flag(r.id, f"record {r.id}: intelligibility {r.intelligibility} "
                       f"outside [0, 1]")
        for tag_name, tag in (("noise_type", r.condition.noise_type),
                              ("system", r.condition.system)):
            if tag is not None and not tag:
                flag(r.id, f"record {r.id}: empty condition tag {tag_name}")
        if declared is not None:
            undeclared = set(r.external_scores) - set(declared)
            if undeclared:
                flag(r.id, f"record {r.id}: undeclared score column(s) "
                           f"{', '.join(sorted(undeclared))}")
    if problems:
        raise ManifestValidationError(problems, bad_ids)


def ingest_manifest(path: str | Path, format: str | None = None) -> Manifest:
    """Read and validate a manifest; records keep their file order.

    ``format`` is ``jsonl`` or ``csv``; if omitted it is inferred from the
    file suffix. Ingestion is deterministic: same bytes, same Manifest.
    """
    path = Path(path)
    if format is None:
        format = "csv" if path.suffix.lower() == ".csv" else "jsonl"
    if format not in ("jsonl", "csv"):
        raise ManifestFormatError(f"unknown manifest format '{format}'")
    if format == "jsonl":
        records, declared = _read_jsonl(path)
    else:
        records, declared = _read_csv(path)
    _validate(records, declared)
    if declared is None:
        declared = []
        for r in records:
            for c in r.external_scores:
                if c not in declared:
                    declared.append(c)
    return Manifest(records=tuple(records), score_columns=tuple(declared),
                    source_path=str(path))


def validate_against_columns(manifest: Manifest) -> list[str]:
    """One warning per (record, declared column) pair with the score absent."""
    return [
        f"record {r.id}: missing score column '{c}'"
        for r in manifest.records
        for c in manifest.score_columns
        if c not in r.external_scores
    ]


def record_to_json_obj(r: UtteranceRecord) -> dict:
    """Plain-dict form with absent fields omitted (absent != zero)."""
    obj: dict = {"id": r.id, "audio_path": r.audio_path}
    if r.reference_text is not None:
        obj["reference_text"] = r.reference_text
    if r.quality_mos is not None:
        obj["quality_mos"] = r.quality_mos
    if r.intelligibility is not None:
        obj["intelligibility"] = r.intelligibility
    cond = {}
    if r.condition.noise_type is not None:
        cond["noise_type"] = r.condition.noise_type
    if r.condition.snr_db is not None:
        cond["snr_db"] = r.condition.snr_db
    if r.condition.system is not None:
        cond["system"] = r.condition.system
    if cond:
        obj["condition"] = cond
    if r.external_scores:
        obj["external_scores"] = dict(r.external_scores)
    return obj


def write_manifest(manifest: Manifest, path: str | Path,
                   format: str | None = None) -> None:
    """Serialize so that re-ingesting yields the same records and columns."""
    path = Path(path)
    if format is None:
        format = "csv" if path.suffix.lower() == ".csv" else "jsonl"
    if format == "jsonl":
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(json.dumps({"score_columns": list(manifest.score_columns)},
                                ensure_ascii=False) + "\n")
            for r in manifest.records:
                fh.write(json.dumps(record_to_json_obj(r), ensure_ascii=False)
                         + "\n")
        return
    if format != "csv":
        raise ManifestFormatError(f"unknown manifest format '{format}'")
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        header = list(FIXED_CSV_COLUMNS) + list(manifest.score_columns)
        writer.writerow(header)
        for r in manifest.records:
            def cell(v):
                return "" if v is None else v
            row = [r.id, r.audio_path, cell(r.reference_text),
                   cell(r.quality_mos), cell(r.intelligibility),
                   cell(r.condition.noise_type), cell(r.condition.snr_db),
                   cell(r.condition.system)]
            row += [cell(r.external_scores.get(c)) for c in manifest.score_columns]
            writer.writerow(row)


def with_score_column(manifest: Manifest, column: str,
                      values: Mapping[str, float]) -> Manifest:
    """New Manifest with one external score column added or replaced.

    ``values`` maps record id to score; records not in the mapping keep the
    column absent.
    """
    new_records = []
    for r in manifest.records:
        scores = dict(r.external_scores)
        scores.pop(column, None)
        if r.id in values:
            scores[column] = float(values[r.id])
        new_records.append(UtteranceRecord(
            id=r.id, audio_path=r.audio_path, reference_text=r.reference_text,
            quality_mos=r.quality_mos, intelligibility=r.intelligibility,
            condition=r.condition, external_scores=scores))
    columns = list(manifest.score_columns)
    if column not in columns:
        columns.append(column)
    return Manifest(records=tuple(new_records), score_columns=tuple(columns),
                    source_path=manifest.source_path)


def iter_target_values(manifest: Manifest, name: str) -> Iterable[tuple[str, float | None]]:
    """(id, value) pairs for a label field or external score column."""
    for r in manifest.records:
        if name == "quality_mos":
            yield r.id, r.quality_mos
        elif name == "intelligibility":
            yield r.id, r.intelligibility
        else:
            yield r.id, r.external_scores.get(name)
