"""CSV/JSON tables and matplotlib figures for evaluation and ablation runs."""

from __future__ import annotations

import csv
import json
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

DPI = 120
METRIC_LABELS = (("pixel_accuracy", "Pixel accuracy"), ("f1", "F1"), ("iou", "IoU"))


def _write_csv(rows, path):
    rows = list(rows)
    with open(path, "w", newline="") as fh:
        if not rows:
            return
        writer = csv.DictWriter(fh, fieldnames=list(rows[0]))
        writer.writeheader()
        writer.writerows(rows)


def write_metrics_report(report, out_dir) -> dict[str, Path]:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = {
        "json": out / "metrics.json",
        "csv": out / "per_query.csv",
        "figure": out / "per_query_scores.png",
    }
    paths["json"].write_text(json.dumps(report.to_json(), indent=1) + "\n")
    rows = [q.as_row() for q in report.per_query]
    _write_csv(rows, paths["csv"])

    fig, axes = plt.subplots(1, 3, figsize=(10, 3.2), sharey=True)
    bins = np.linspace(0.0, 1.0, 21)
    for ax, (key, label) in zip(axes, METRIC_LABELS):
        values = [r[key] for r in rows]
        ax.hist(values, bins=bins, color="0.35", edgecolor="white")
        ax.axvline(getattr(report, key), color="tab:red", lw=1.2, label="micro-average")
        ax.set_xlabel(label)
        ax.set_xlim(0, 1)
    axes[0].set_ylabel("queries")
    axes[0].legend(frameon=False, fontsize=8, loc="upper left")
    fig.tight_layout()
    fig.savefig(paths["figure"], dpi=DPI)
    plt.close(fig)
    return paths


def write_ablation_report(rows, out_dir) -> dict[str, Path]:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = {
        "json": out / "ablation.json",
        "csv": out / "ablation.csv",
        "figure": out / "ablation.png",
    }
    table = [r.as_row() for r in rows]
    paths["json"].write_text(json.dumps(table, indent=1) + "\n")
    _write_csv(table, paths["csv"])

    fig, ax = plt.subplots(figsize=(7, 3.6))
    x = np.arange(len(METRIC_LABELS))
    width = 0.8 / max(1, len(table))
    for i, row in enumerate(table):
        heights = [row[key] for key, _ in METRIC_LABELS]
        bars = ax.bar(x + (i - (len(table) - 1) / 2) * width, heights, width, label=row["method"])
        ax.bar_label(bars, fmt="%.3f", fontsize=7, padding=1)
    ax.set_xticks(x, [label for _, label in METRIC_LABELS])
    ax.set_ylim(0, 1.08)
    ax.legend(frameon=False, fontsize=8, loc="lower right")
    fig.tight_layout()
    fig.savefig(paths["figure"], dpi=DPI)
    plt.close(fig)
    return paths


def format_table(rows) -> str:
    """Plain-text ablation table, one line per method."""
    lines = [f"{'method':<32}{'pixel_acc':>11}{'f1':>9}{'iou':>9}{'masks':>8}"]
    for r in rows:
        row = r.as_row()
        lines.append(
            f"{row['method']:<32}{row['pixel_accuracy']:>11.4f}{row['f1']:>9.4f}"
            f"{row['iou']:>9.4f}{row['masks_used']:>8d}"
        )
    return "\n".join(lines)
