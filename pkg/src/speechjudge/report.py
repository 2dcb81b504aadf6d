"""Report emission: machine-readable JSON/CSV plus a human-readable table.

The text table lays out rows per predictor with an LCC/SRCC column pair per
target. Undefined correlations print as "undef" and serialize as null, never
as 0.

The JSON emission is byte-deterministic: volatile metadata (wall-clock
timestamps) is left out, keys are sorted, floats use shortest round-trip
repr. Re-emitting a report loaded from JSON reproduces the same bytes.
"""

from __future__ import annotations

import csv
import json
from pathlib import Path

from speechjudge.errors import ConfigError
from speechjudge.harness import (
    VOLATILE_METADATA_KEYS,
    EvaluationReport,
    FailureEntry,
    PairEntry,
)
from speechjudge.metrics import Histogram

REPORT_FORMATS = ("json", "csv", "text_table")

UNDEF = "undef"


def report_to_dict(report: EvaluationReport, include_volatile: bool = True) -> dict:
    metadata = dict(report.run_metadata)
    if not include_volatile:
        for key in VOLATILE_METADATA_KEYS:
            metadata.pop(key, None)
    return {
        "run_metadata": metadata,
        "pairs": [
            {"predictor": p.predictor, "target": p.target,
             "lcc": p.lcc, "srcc": p.srcc,
             "n_pairs": p.n_pairs, "n_dropped": p.n_dropped}
            for p in report.pairs
        ],
        "histograms": {
            name: {"bin_edges": list(h.bin_edges), "counts": list(h.counts),
                   "total": h.total}
            for name, h in report.histograms.items()
        },
        "failures": [
            {"utterance_id": f.utterance_id, "stage": f.stage,
             "reason": f.reason}
            for f in report.failures
        ],
    }


def report_from_dict(obj: dict) -> EvaluationReport:
    pairs = [PairEntry(p["predictor"], p["target"], p["lcc"], p["srcc"],
                       p["n_pairs"], p["n_dropped"]) for p in obj["pairs"]]
    histograms = {
        name: Histogram(tuple(h["bin_edges"]), tuple(h["counts"]), h["total"])
        for name, h in obj["histograms"].items()
    }
    failures = [FailureEntry(f["utterance_id"], f["stage"], f["reason"])
                for f in obj["failures"]]
    return EvaluationReport(run_metadata=dict(obj["run_metadata"]),
                            pairs=pairs, histograms=histograms,
                            failures=failures)


def report_from_json(path: str | Path) -> EvaluationReport:
    with open(path, encoding="utf-8") as fh:
        return report_from_dict(json.load(fh))


def _fmt_corr(value: float | None) -> str:
    return UNDEF if value is None else repr(float(value))


def _write_json(report: EvaluationReport, path: Path) -> None:
    payload = report_to_dict(report, include_volatile=False)
    path.write_text(json.dumps(payload, sort_keys=True, indent=2,
                               ensure_ascii=False) + "\n", encoding="utf-8")


def _write_csv(report: EvaluationReport, path: Path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["predictor", "target", "lcc", "srcc",
                         "n_pairs", "n_dropped"])
        for p in report.pairs:
            writer.writerow([p.predictor, p.target, _fmt_corr(p.lcc),
                             _fmt_corr(p.srcc), p.n_pairs, p.n_dropped])


def _corr_cell(value: float | None) -> str:
    return UNDEF if value is None else f"{value:.4f}"


def render_text_table(report: EvaluationReport) -> str:
    """Correlation matrix: rows are predictors, an LCC/SRCC pair per target."""
    predictors: list[str] = []
    targets: list[str] = []
    for p in report.pairs:
        if p.predictor not in predictors:
            predictors.append(p.predictor)
        if p.target not in targets:
            targets.append(p.target)
    by_key = {(p.predictor, p.target): p for p in report.pairs}

    name_width = max([len("predictor")] + [len(p) for p in predictors])
    col_width = max([21] + [len(t) + 4 for t in targets])

    lines = []
    header = "predictor".ljust(name_width)
    subheader = " " * name_width
    for t in targets:
        header += " | " + t.center(col_width)
        subheader += " | " + f"{'LCC':>9} {'SRCC':>9}".center(col_width)
    rule = "-" * len(header)
    lines += [header, subheader, rule]
    for pname in predictors:
        row = pname.ljust(name_width)
        for tname in targets:
            entry = by_key.get((pname, tname))
            if entry is None:
                cell = f"{'-':>9} {'-':>9}"
            else:
                cell = f"{_corr_cell(entry.lcc):>9} {_corr_cell(entry.srcc):>9}"
            row += " | " + cell.center(col_width)
        lines.append(row)
    lines.append(rule)

    lines.append("")
    lines.append("pairs:")
    for p in report.pairs:
        lines.append(f"  {p.predictor} vs {p.target}: "
                     f"lcc={_corr_cell(p.lcc)} srcc={_corr_cell(p.srcc)} "
                     f"n={p.n_pairs} dropped={p.n_dropped}")

    lines.append("")
    lines.append(f"failures: {len(report.failures)}")
    for f in report.failures:
        lines.append(f"  {f.utterance_id} [{f.stage}] {f.reason}")

    lines.append("")
    lines.append("histograms (counts per bin):")
    for name, h in report.histograms.items():
        lo, hi = h.bin_edges[0], h.bin_edges[-1]
        lines.append(f"  {name} [{lo:g}, {hi:g}] n={h.total}: "
                     + " ".join(str(c) for c in h.counts))

    lines.append("")
    lines.append("run metadata:")
    for key in sorted(report.run_metadata):
        lines.append(f"  {key}: {json.dumps(report.run_metadata[key], ensure_ascii=False, sort_keys=True)}")
    return "\n".join(lines) + "\n"


def emit_report(report: EvaluationReport, formats, out_dir: str | Path) -> dict:
    """Write the requested formats into out_dir; returns {format: path}."""
    unknown = set(formats) - set(REPORT_FORMATS)
    if unknown:
        raise ConfigError(f"unknown report format(s): {', '.join(sorted(unknown))}")
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    written = {}
    if "json" in formats:
        path = out_dir / "report.json"
        _write_json(report, path)
        written["json"] = path
    if "csv" in formats:
        path = out_dir / "report.csv"
        _write_csv(report, path)
        written["csv"] = path
    if "text_table" in formats:
        path = out_dir / "report.txt"
        path.write_text(render_text_table(report), encoding="utf-8")
        written["text_table"] = path
    return written
