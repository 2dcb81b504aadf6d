"""Render report histograms to PNG files alongside the delimited output."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402  (backend must be set first)

from speechjudge.harness import EvaluationReport  # noqa: E402


def _safe_name(name: str) -> str:
    return "".join(c if c.isalnum() or c in "-_" else "_" for c in name)


def _bar(ax, hist, title: str) -> None:
    edges = list(hist.bin_edges)
    widths = [b - a for a, b in zip(edges, edges[1:])]
    ax.bar(edges[:-1], hist.counts, width=widths, align="edge",
           edgecolor="black", linewidth=0.4)
    ax.set_title(title, fontsize=10)
    ax.set_xlabel("score")
    ax.set_ylabel("count")


def render_figures(report: EvaluationReport, out_dir: str | Path) -> list[Path]:
    """One PNG per histogram plus a combined distribution grid.

    Returns the written paths in a stable order.
    """
    out_dir = Path(out_dir) / "figures"
    out_dir.mkdir(parents=True, exist_ok=True)
    written: list[Path] = []

    names = list(report.histograms)
    for name in names:
        fig, ax = plt.subplots(figsize=(5, 3.2))
        _bar(ax, report.histograms[name], f"{name} (n={report.histograms[name].total})")
        fig.tight_layout()
        path = out_dir / f"hist_{_safe_name(name)}.png"
        fig.savefig(path, dpi=120)
        plt.close(fig)
        written.append(path)

    if names:
        cols = min(3, len(names))
        rows = (len(names) + cols - 1) // cols
        fig, axes = plt.subplots(rows, cols,
                                 figsize=(4.5 * cols, 3.0 * rows),
                                 squeeze=False)
        for i, name in enumerate(names):
            _bar(axes[i // cols][i % cols], report.histograms[name], name)
        for j in range(len(names), rows * cols):
            axes[j // cols][j % cols].axis("off")
        fig.tight_layout()
        path = out_dir / "distributions.png"
        fig.savefig(path, dpi=120)
        plt.close(fig)
        written.append(path)
    return written
