"""Report rendering: metrics as JSON, an aligned text table, a tab-delimited
file, and matplotlib figures saved next to them."""

from __future__ import annotations

import json
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt

from .evaluation import EvalReport


def write_eval_report(report: EvalReport, out_dir) -> dict[str, Path]:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    figures = out / "figures"
    figures.mkdir(exist_ok=True)

    paths = {
        "json": out / "report.json",
        "table": out / "report.txt",
        "tsv": out / "report.tsv",
        "map_figure": figures / "map_vs_iou.png",
        "ar_figure": figures / "ar_vs_an.png",
    }

    with open(paths["json"], "w") as fh:
        json.dump(report.to_dict(), fh, indent=2)
        fh.write("\n")

    paths["table"].write_text(format_table(report))
    paths["tsv"].write_text(format_tsv(report))
    _plot_map(report, paths["map_figure"])
    _plot_ar(report, paths["ar_figure"])
    return paths


def format_table(report: EvalReport) -> str:
    lines = ["detection mAP by tIoU threshold", "-" * 34]
    for thr, value in sorted(report.map_per_iou.items()):
        lines.append(f"  mAP@{thr:<5g} {value:8.4f}")
    lines.append(f"  {'AVG':<9s} {report.average_map:8.4f}")
    lines.append("")
    lines.append("proposal quality")
    lines.append("-" * 34)
    for an, value in sorted(report.ar_at_an.items()):
        lines.append(f"  AR@{an:<6d} {value:8.4f}")
    lines.append(f"  {'AUC':<9s} {report.auc:8.4f}")
    lines.append(f"  {'mIoU':<9s} {report.miou:8.4f}")
    if report.per_class_ap:
        lines.append("")
        thresholds = sorted(next(iter(report.per_class_ap.values())))
        width = max(len(c) for c in report.per_class_ap) + 2
        header = "class".ljust(width) + "".join(f"AP@{t:<7g}" for t in thresholds)
        lines.extend(["per-class average precision", "-" * len(header), header])
        for cls in sorted(report.per_class_ap):
            row = cls.ljust(width)
            row += "".join(f"{report.per_class_ap[cls][t]:<10.4f}" for t in thresholds)
            lines.append(row)
    return "\n".join(lines) + "\n"


def format_tsv(report: EvalReport) -> str:
    rows = [("metric", "value")]
    for thr, value in sorted(report.map_per_iou.items()):
        rows.append((f"map@{thr:g}", f"{value:.6f}"))
    rows.append(("average_map", f"{report.average_map:.6f}"))
    for an, value in sorted(report.ar_at_an.items()):
        rows.append((f"ar@{an}", f"{value:.6f}"))
    rows.append(("auc", f"{report.auc:.6f}"))
    rows.append(("miou", f"{report.miou:.6f}"))
    for cls in sorted(report.per_class_ap):
        for thr, value in sorted(report.per_class_ap[cls].items()):
            rows.append((f"ap@{thr:g}/{cls}", f"{value:.6f}"))
    return "\n".join("\t".join(row) for row in rows) + "\n"


def _plot_map(report: EvalReport, path: Path):
    thresholds = sorted(report.map_per_iou)
    values = [report.map_per_iou[t] for t in thresholds]
    fig, ax = plt.subplots(figsize=(5, 3.5))
    ax.plot(thresholds, values, marker="o")
    ax.axhline(report.average_map, linestyle="--", linewidth=1, label=f"AVG {report.average_map:.3f}")
    ax.set_xlabel("tIoU threshold")
    ax.set_ylabel("mAP")
    ax.set_ylim(0, 1.02)
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=120, metadata={"Date": None})  # byte-reproducible output
    plt.close(fig)


def _plot_ar(report: EvalReport, path: Path):
    fig, ax = plt.subplots(figsize=(5, 3.5))
    if report.ar_curve:
        budgets = range(1, len(report.ar_curve) + 1)
        ax.plot(budgets, report.ar_curve, label=f"AUC {report.auc:.3f}")
    for an, value in sorted(report.ar_at_an.items()):
        ax.plot([an], [value], marker="s", color="tab:red")
        ax.annotate(f"AR@{an}", (an, value), textcoords="offset points", xytext=(4, 4), fontsize=8)
    ax.set_xlabel("proposals per video (AN)")
    ax.set_ylabel("average recall")
    ax.set_ylim(0, 1.02)
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=120, metadata={"Date": None})  # byte-reproducible output
    plt.close(fig)


def write_train_figure(records: list[dict], path):
    """Loss components per epoch from the JSONL records."""
    if not records:
        return
    epochs = [r["epoch"] for r in records]
    fig, ax = plt.subplots(figsize=(6, 3.5))
    for key, label in (("loss", "total"), ("l_cls", "cls"), ("l_l1", "L1"), ("l_tiou", "tIoU"), ("l_ad", "actionness")):
        ax.plot(epochs, [r[key] for r in records], label=label)
    ax.set_xlabel("epoch")
    ax.set_ylabel("loss")
    ax.set_yscale("log")
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=120, metadata={"Date": None})  # byte-reproducible output
    plt.close(fig)
