"""Merge audit runs into a summary table and render the companion figures.

The delimited summary has one row per (run, delta) group; the figures show
the core-set-size histogram and the accuracy / mean-leakage comparison for
each group, written next to the CSV.
"""

from __future__ import annotations

import csv
from collections import defaultdict
from pathlib import Path
from typing import Sequence

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402  (backend must be set first)

import numpy as np  # noqa: E402

from . import data_io  # noqa: E402

SUMMARY_FIELDS = (
    "run", "delta", "samples", "accuracy", "baseline_accuracy", "mean_leakage",
)


def summarize_runs(paths: Sequence[str | Path]) -> list[dict]:
    """One summary row per (run, delta) group across the given audit files.

    The run id is the file stem, so identical groups from different files
    stay distinguishable.
    """
    rows = []
    for path in paths:
        path = Path(path)
        groups: dict[float, list[dict]] = defaultdict(list)
        for rec in data_io.read_audit_records(path):
            groups[rec["delta"]].append(rec)
        for delta in sorted(groups):
            recs = groups[delta]
            rows.append({
                "run": path.stem,
                "delta": delta,
                "samples": len(recs),
                "accuracy": float(np.mean([r["repr_label"] == r["true_label"] for r in recs])),
                "baseline_accuracy": float(
                    np.mean([r["baseline_label"] == r["true_label"] for r in recs])),
                "mean_leakage": float(np.mean([r["leakage"] for r in recs])),
            })
    return rows


def write_summary_csv(rows: Sequence[dict], path: str | Path) -> None:
    with Path(path).open("w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=SUMMARY_FIELDS)
        writer.writeheader()
        for row in rows:
            writer.writerow({k: row[k] for k in SUMMARY_FIELDS})


def _leakage_counts(paths: Sequence[Path]) -> dict[tuple[str, float], np.ndarray]:
    counts: dict[tuple[str, float], np.ndarray] = {}
    for path in paths:
        per_delta: dict[float, list[int]] = defaultdict(list)
        for rec in data_io.read_audit_records(path):
            per_delta[rec["delta"]].append(rec["leakage"])
        for delta, leaks in per_delta.items():
            counts[(path.stem, delta)] = np.bincount(leaks)
    return counts


def render_figures(paths: Sequence[str | Path], out_dir: str | Path) -> list[Path]:
    """Write histogram and accuracy/leakage figures for the audit files."""
    paths = [Path(p) for p in paths]
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    summary = summarize_runs(paths)
    written = []

    counts = _leakage_counts(paths)
    fig, ax = plt.subplots(figsize=(7, 4))
    width = 0.8 / max(len(counts), 1)
    for k, ((run, delta), bins) in enumerate(sorted(counts.items())):
        ax.bar(np.arange(bins.size) + k * width, bins, width=width,
               label=f"{run} (delta={delta:g})")
    ax.set_xlabel("core feature set size")
    ax.set_ylabel("samples")
    ax.set_title("Disclosure per sample")
    ax.legend(fontsize=8)
    hist_path = out_dir / "histogram.png"
    fig.tight_layout()
    fig.savefig(hist_path, dpi=150)
    plt.close(fig)
    written.append(hist_path)

    fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(10, 4))
    labels = [f"{r['run']}\ndelta={r['delta']:g}" for r in summary]
    xs = np.arange(len(summary))
    ax1.bar(xs - 0.2, [r["accuracy"] for r in summary], width=0.4, label="core-set")
    ax1.bar(xs + 0.2, [r["baseline_accuracy"] for r in summary], width=0.4,
            label="full disclosure")
    ax1.set_xticks(xs, labels, fontsize=7)
    ax1.set_ylabel("accuracy")
    ax1.legend(fontsize=8)
    ax2.bar(xs, [r["mean_leakage"] for r in summary], width=0.5, color="tab:orange")
    ax2.set_xticks(xs, labels, fontsize=7)
    ax2.set_ylabel("mean sensitive features revealed")
    fig.tight_layout()
    acc_path = out_dir / "accuracy_leakage.png"
    fig.savefig(acc_path, dpi=150)
    plt.close(fig)
    written.append(acc_path)
    return written


def generate_report(paths: Sequence[str | Path], out_dir: str | Path) -> dict:
    """Write summary.csv plus figures; returns the paths and row count."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    rows = summarize_runs(paths)
    csv_path = out_dir / "summary.csv"
    write_summary_csv(rows, csv_path)
    figures = render_figures(paths, out_dir)
    return {"summary": csv_path, "figures": figures, "rows": len(rows)}
