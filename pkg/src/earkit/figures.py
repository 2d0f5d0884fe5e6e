"""Chart rendering for distribution tables and agreement reports.

Companion to the delimited exports: the CLI writes these figures next
to the CSV output when asked to. Uses the non-interactive backend so it
works headless.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt

from .agreement import AgreementReport
from .reporting import DistributionTable


def save_distribution_figure(table: DistributionTable, path: str | Path) -> Path:
    """Bar chart of a distribution table, one bar group per row."""
    path = Path(path)
    labels = [
        f"{r.group}/{r.label}" if r.group else r.label for r in table.rows
    ]
    n_cols = len(table.columns)
    width = 0.8 / max(n_cols, 1)
    fig, ax = plt.subplots(figsize=(max(6.0, 0.38 * len(labels)), 4.0))
    xs = range(len(labels))
    for i, col in enumerate(table.columns):
        offsets = [x + (i - (n_cols - 1) / 2) * width for x in xs]
        ax.bar(offsets, [r.counts[i] for r in table.rows], width=width, label=col)
    ax.set_xticks(list(xs))
    ax.set_xticklabels(labels, rotation=90, fontsize=7)
    ax.set_ylabel("count")
    ax.set_title(table.title)
    if n_cols > 1:
        ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return path


def save_agreement_figure(report: AgreementReport, path: str | Path) -> Path:
    """Per-stage agreement ratio and pattern coverage, with kappa overlaid."""
    path = Path(path)
    stages = [f"stage {s.stage}" for s in report.stages]
    ratios = [s.ratio or 0.0 for s in report.stages]
    covs = [s.pattern_coverage.ratio or 0.0 for s in report.stages]
    kappas = [s.kappa if s.kappa is not None else 0.0 for s in report.stages]

    fig, ax = plt.subplots(figsize=(6.0, 4.0))
    xs = range(len(stages))
    ax.bar([x - 0.2 for x in xs], ratios, width=0.4, label="(semi-)agreed")
    ax.bar([x + 0.2 for x in xs], covs, width=0.4, label="coverage")
    ax.plot(list(xs), kappas, "ko-", label="kappa")
    ax.set_xticks(list(xs))
    ax.set_xticklabels(stages)
    ax.set_ylim(0.0, 1.05)
    ax.set_ylabel("ratio")
    ax.set_title("agreement by stage")
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return path
