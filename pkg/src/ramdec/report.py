"""Report rendering: CSV tables plus matplotlib figures written to a directory."""

from __future__ import annotations

import csv
import math
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt

from .mlp import EpochReport
from .score import ScoreReport


def write_training_report(reports: list[EpochReport], out_dir) -> list[str]:
    """Per-epoch metrics as CSV and a loss/accuracy curve figure."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    csv_path = out / "training_metrics.csv"
    with open(csv_path, "w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f)
        writer.writerow(["epoch", "mean_cross_entropy", "frame_accuracy"])
        for r in reports:
            writer.writerow([r.epoch, f"{r.mean_cross_entropy:.6f}", f"{r.frame_accuracy:.6f}"])

    epochs = [r.epoch for r in reports]
    fig, (ax_loss, ax_acc) = plt.subplots(1, 2, figsize=(9, 3.5))
    ax_loss.plot(epochs, [r.mean_cross_entropy for r in reports], marker="o")
    ax_loss.set_xlabel("epoch")
    ax_loss.set_ylabel("mean cross-entropy")
    ax_loss.set_title("training loss")
    ax_acc.plot(epochs, [r.frame_accuracy for r in reports], marker="o", color="tab:green")
    ax_acc.set_xlabel("epoch")
    ax_acc.set_ylabel("frame accuracy")
    ax_acc.set_ylim(0.0, 1.02)
    ax_acc.set_title("training accuracy")
    fig.tight_layout()
    png_path = out / "training_curves.png"
    fig.savefig(png_path, dpi=120)
    plt.close(fig)
    return [str(csv_path), str(png_path)]


def write_score_report(report: ScoreReport, out_dir) -> list[str]:
    """Per-utterance WER as CSV and an error-breakdown figure."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    csv_path = out / "utterance_scores.csv"
    with open(csv_path, "w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f)
        writer.writerow(["utterance", "num_ref", "sub", "del", "ins", "wer_percent"])
        for key, u in report.per_utterance.items():
            wer = "inf" if math.isinf(u.wer_percent) else f"{u.wer_percent:.2f}"
            writer.writerow([key, u.num_ref, u.subs, u.dels, u.ins, wer])

    fig, (ax_counts, ax_hist) = plt.subplots(1, 2, figsize=(9, 3.5))
    ax_counts.bar(
        ["sub", "del", "ins"],
        [report.subs, report.dels, report.ins],
        color=["tab:orange", "tab:red", "tab:blue"],
    )
    ax_counts.set_ylabel("count")
    ax_counts.set_title(f"corpus errors ({report.errors} / {report.num_ref} ref words)")
    wers = [
        u.wer_percent for u in report.per_utterance.values() if not math.isinf(u.wer_percent)
    ]
    if wers:
        ax_hist.hist(wers, bins=min(20, max(5, len(wers) // 2)), color="tab:gray")
    ax_hist.set_xlabel("per-utterance WER %")
    ax_hist.set_ylabel("utterances")
    ax_hist.set_title("WER distribution")
    fig.tight_layout()
    png_path = out / "score_summary.png"
    fig.savefig(png_path, dpi=120)
    plt.close(fig)
    return [str(csv_path), str(png_path)]
