"""JSON / CSV / SVG emission for evaluation and comparison reports.

Figures are hand-built SVG strings: deterministic bytes, no plotting
dependency, and diffable run to run.
"""

from __future__ import annotations

import csv
import json
import io

import numpy as np

from ..datamodel import EXEMPLARS_PER_CATEGORY
from .harness import ComparisonReport, EvalReport, TransferReport

CATEGORY_NAMES = ("HB", "HF", "AB", "AF", "FV", "IO")
CATEGORY_COLORS = ("#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#e6c200")


def class_names(n_classes: int) -> list:
    if n_classes == 6:
        return list(CATEGORY_NAMES)
    return [f"{CATEGORY_NAMES[e // EXEMPLARS_PER_CATEGORY]}{e % EXEMPLARS_PER_CATEGORY + 1:02d}"
            for e in range(n_classes)]


def to_json(report) -> str:
    return json.dumps(report.to_dict(), indent=1, sort_keys=True)


# ---- CSV tables ------------------------------------------------------------

def _csv_string(rows) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerows(rows)
    return buf.getvalue()


def eval_csv(report: EvalReport) -> str:
    """Per-fold accuracies followed by fold-averaged per-class metrics."""
    names = class_names(report.n_classes)
    rows = [["fold", "accuracy"]]
    rows += [[f, f"{a:.6f}"] for f, a in enumerate(report.per_fold_accuracy)]
    rows.append(["mean", f"{report.accuracy_mean:.6f}"])
    rows.append(["std", f"{report.accuracy_std:.6f}"])
    rows.append([])
    rows.append(["class", "precision", "recall", "f1"])
    for i, name in enumerate(names):
        rows.append([name, f"{report.precision[i]:.6f}", f"{report.recall[i]:.6f}",
                     f"{report.f1[i]:.6f}"])
    return _csv_string(rows)


def comparison_csv(report: ComparisonReport) -> str:
    rows = [["method", "mean_accuracy", "std_accuracy", "t", "p", "stars"]]
    for r in report.rows:
        if r.ttest is None:
            rows.append([r.method, f"{r.mean:.6f}", f"{r.std:.6f}", "", "", ""])
        else:
            rows.append([r.method, f"{r.mean:.6f}", f"{r.std:.6f}",
                         f"{r.ttest.t:.6f}", f"{r.ttest.p:.6g}", r.ttest.stars])
    rows.append([])
    rows.append(["subject"] + [r.method for r in report.rows])
    for j, subject in enumerate(report.subjects):
        rows.append([subject] + [f"{r.per_subject_accuracy[j]:.6f}" for r in report.rows])
    return _csv_string(rows)


def comparison_text(report: ComparisonReport) -> str:
    """Method-comparison summary in the style of the published table."""
    lines = [f"{report.n_classes}-class accuracy, {report.k}-fold CV over "
             f"{len(report.subjects)} subject(s); reference: {report.reference_method}"]
    chance = 100.0 / report.n_classes
    lines.append(f"chance level: {chance:.2f}%")
    for r in report.rows:
        stars = r.ttest.stars if r.ttest else ""
        lines.append(f"  {r.method:<16s} {100 * r.mean:6.2f} +/- {100 * r.std:5.2f} % {stars}")
    return "\n".join(lines) + "\n"


def transfer_csv(report: TransferReport) -> str:
    rows = [["fold", "transfer_accuracy", "scratch_accuracy"]]
    for f, (t, s) in enumerate(zip(report.per_fold_transfer_accuracy,
                                   report.per_fold_scratch_accuracy)):
        rows.append([f, f"{t:.6f}", f"{s:.6f}"])
    rows.append(["mean", f"{report.transfer_mean:.6f}", f"{report.scratch_mean:.6f}"])
    rows.append(["std", f"{report.transfer_std:.6f}", f"{report.scratch_std:.6f}"])
    return _csv_string(rows)


# ---- SVG figures -----------------------------------------------------------

def _heat_color(v: float) -> str:
    """Two-stop white -> deep blue ramp for confusion cells."""
    v = min(max(v, 0.0), 1.0)
    r = int(round(255 - 205 * v))
    g = int(round(255 - 175 * v))
    b = int(round(255 - 85 * v))
    return f"#{r:02x}{g:02x}{b:02x}"


def svg_confusion(confusion, names=None) -> str:
    cm = np.asarray(confusion, dtype=np.float64)
    n = cm.shape[0]
    names = names or [str(i) for i in range(n)]
    cell = 46 if n <= 12 else 12
    label_pad = 42
    size = label_pad + n * cell + 10
    parts = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{size}" height="{size}" '
             f'font-family="monospace" font-size="{11 if n <= 12 else 6}">']
    for i in range(n):
        for j in range(n):
            x, y = label_pad + j * cell, label_pad + i * cell
            parts.append(f'<rect x="{x}" y="{y}" width="{cell}" height="{cell}" '
                         f'fill="{_heat_color(cm[i, j])}" stroke="#ffffff"/>')
            if n <= 12:
                parts.append(f'<text x="{x + cell / 2:.0f}" y="{y + cell / 2 + 4:.0f}" '
                             f'text-anchor="middle">{cm[i, j]:.2f}</text>')
    if n <= 12:
        for i, name in enumerate(names):
            parts.append(f'<text x="{label_pad - 4}" y="{label_pad + i * cell + cell / 2 + 4:.0f}" '
                         f'text-anchor="end">{name}</text>')
            parts.append(f'<text x="{label_pad + i * cell + cell / 2:.0f}" y="{label_pad - 6}" '
                         f'text-anchor="middle">{name}</text>')
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def svg_exemplar_bars(per_exemplar_accuracy) -> str:
    """72 bars colored by semantic category."""
    values = [0.0 if v is None else float(v) for v in per_exemplar_accuracy]
    n = len(values)
    bar_w, gap, height, base = 9, 2, 160, 20
    width = base * 2 + n * (bar_w + gap)
    parts = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height + 40}" '
             f'font-family="monospace" font-size="9">']
    parts.append(f'<line x1="{base}" y1="{height + base}" x2="{width - base}" y2="{height + base}" '
                 f'stroke="#000000"/>')
    for e, v in enumerate(values):
        color = CATEGORY_COLORS[(e // EXEMPLARS_PER_CATEGORY) % len(CATEGORY_COLORS)]
        h = v * height
        x = base + e * (bar_w + gap)
        parts.append(f'<rect x="{x}" y="{height + base - h:.1f}" width="{bar_w}" '
                     f'height="{h:.1f}" fill="{color}"/>')
        if e % EXEMPLARS_PER_CATEGORY == 5:
            cat = CATEGORY_NAMES[e // EXEMPLARS_PER_CATEGORY]
            parts.append(f'<text x="{x}" y="{height + base + 14}">{cat}</text>')
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def write_eval_outputs(report: EvalReport, outdir, stem: str) -> list:
    """Write JSON + CSV + figures; returns the created file names."""
    outdir.mkdir(parents=True, exist_ok=True)
    created = []

    def emit(name, text):
        (outdir / name).write_text(text)
        created.append(name)

    emit(f"{stem}.json", to_json(report))
    emit(f"{stem}.csv", eval_csv(report))
    emit(f"{stem}_confusion.svg", svg_confusion(report.confusion, class_names(report.n_classes)))
    emit(f"{stem}_exemplars.svg", svg_exemplar_bars(report.per_exemplar_accuracy))
    return created


def write_comparison_outputs(report: ComparisonReport, outdir, stem: str) -> list:
    outdir.mkdir(parents=True, exist_ok=True)
    created = []
    (outdir / f"{stem}.json").write_text(to_json(report))
    created.append(f"{stem}.json")
    (outdir / f"{stem}.csv").write_text(comparison_csv(report))
    created.append(f"{stem}.csv")
    (outdir / f"{stem}.txt").write_text(comparison_text(report))
    created.append(f"{stem}.txt")
    return created
