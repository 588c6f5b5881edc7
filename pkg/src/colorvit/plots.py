"""Static SVG renderings of evaluation results.

The files are assembled from strings with fixed coordinate formatting,
so the same report always produces byte-identical output. Only two
figures exist: overlaid one-vs-rest ROC curves and a confusion-matrix
heat map.
"""

from __future__ import annotations

import os

from .metrics import EvaluationReport

_PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd",
            "#ff7f0e", "#8c564b", "#e377c2", "#7f7f7f")

_W, _H = 640, 520
_ML, _MR, _MT, _MB = 70, 30, 40, 60


def _fmt(v: float) -> str:
    return f"{v:.2f}"


def _svg_header(title: str) -> list[str]:
    return [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{_W}" height="{_H}" '
        f'viewBox="0 0 {_W} {_H}" font-family="sans-serif">',
        f'<rect width="{_W}" height="{_H}" fill="#ffffff"/>',
        f'<text x="{_W / 2:.0f}" y="24" text-anchor="middle" font-size="16">{title}</text>',
    ]


def roc_svg(report: EvaluationReport, title: str = "One-vs-rest ROC") -> str:
    """Overlay every defined per-class ROC curve plus the chance diagonal."""
    plot_w = _W - _ML - _MR
    plot_h = _H - _MT - _MB

    def x(fpr):
        return _ML + fpr * plot_w

    def y(tpr):
        return _MT + (1.0 - tpr) * plot_h

    parts = _svg_header(title)
    parts.append(
        f'<rect x="{_ML}" y="{_MT}" width="{plot_w}" height="{plot_h}" '
        f'fill="none" stroke="#333333"/>'
    )
    for tick in (0.0, 0.25, 0.5, 0.75, 1.0):
        tx, ty = x(tick), y(tick)
        parts.append(
            f'<line x1="{_fmt(tx)}" y1="{_MT + plot_h}" x2="{_fmt(tx)}" '
            f'y2="{_MT + plot_h + 5}" stroke="#333333"/>'
        )
        parts.append(
            f'<text x="{_fmt(tx)}" y="{_MT + plot_h + 20}" text-anchor="middle" '
            f'font-size="11">{tick:g}</text>'
        )
        parts.append(
            f'<line x1="{_ML - 5}" y1="{_fmt(ty)}" x2="{_ML}" y2="{_fmt(ty)}" '
            f'stroke="#333333"/>'
        )
        parts.append(
            f'<text x="{_ML - 8}" y="{_fmt(ty + 4)}" text-anchor="end" '
            f'font-size="11">{tick:g}</text>'
        )
    parts.append(
        f'<text x="{_ML + plot_w / 2:.0f}" y="{_H - 14}" text-anchor="middle" '
        f'font-size="13">False positive rate</text>'
    )
    parts.append(
        f'<text x="18" y="{_MT + plot_h / 2:.0f}" text-anchor="middle" font-size="13" '
        f'transform="rotate(-90 18 {_MT + plot_h / 2:.0f})">True positive rate</text>'
    )
    parts.append(
        f'<line x1="{_fmt(x(0))}" y1="{_fmt(y(0))}" x2="{_fmt(x(1))}" y2="{_fmt(y(1))}" '
        f'stroke="#999999" stroke-dasharray="6,4"/>'
    )

    legend_y = _MT + 14
    for curve in report.curves:
        color = _PALETTE[curve.class_index % len(_PALETTE)]
        points = " ".join(
            f"{_fmt(x(f))},{_fmt(y(t))}" for f, t in zip(curve.fpr, curve.tpr)
        )
        parts.append(
            f'<polyline points="{points}" fill="none" stroke="{color}" stroke-width="2"/>'
        )
        name = report.class_names[curve.class_index]
        auc_value = report.per_class_auc[curve.class_index]
        label = f"{name} (AUC {auc_value:.4f})"
        lx = _ML + plot_w - 190
        parts.append(
            f'<line x1="{lx}" y1="{legend_y - 4}" x2="{lx + 22}" y2="{legend_y - 4}" '
            f'stroke="{color}" stroke-width="2"/>'
        )
        parts.append(
            f'<text x="{lx + 28}" y="{legend_y}" font-size="12">{label}</text>'
        )
        legend_y += 18
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def confusion_svg(report: EvaluationReport, title: str = "Confusion matrix") -> str:
    """Heat map of counts, rows true class, columns predicted class."""
    c = len(report.class_names)
    plot_w = _W - _ML - _MR
    plot_h = _H - _MT - _MB
    cell_w = plot_w / c
    cell_h = plot_h / c
    top = int(report.confusion.max()) or 1

    parts = _svg_header(title)
    for i in range(c):
        for j in range(c):
            count = int(report.confusion[i, j])
            # white through a mid blue; darker cell, larger count
            shade = count / top
            r = int(round(255 - 200 * shade))
            g = int(round(255 - 140 * shade))
            cx = _ML + j * cell_w
            cy = _MT + i * cell_h
            parts.append(
                f'<rect x="{_fmt(cx)}" y="{_fmt(cy)}" width="{_fmt(cell_w)}" '
                f'height="{_fmt(cell_h)}" fill="rgb({r},{g},255)" stroke="#ffffff"/>'
            )
            text_fill = "#ffffff" if shade > 0.6 else "#222222"
            parts.append(
                f'<text x="{_fmt(cx + cell_w / 2)}" y="{_fmt(cy + cell_h / 2 + 5)}" '
                f'text-anchor="middle" font-size="14" fill="{text_fill}">{count}</text>'
            )
    for i, name in enumerate(report.class_names):
        parts.append(
            f'<text x="{_ML - 8}" y="{_fmt(_MT + i * cell_h + cell_h / 2 + 4)}" '
            f'text-anchor="end" font-size="12">{name}</text>'
        )
        parts.append(
            f'<text x="{_fmt(_ML + i * cell_w + cell_w / 2)}" y="{_MT + plot_h + 18}" '
            f'text-anchor="middle" font-size="12">{name}</text>'
        )
    parts.append(
        f'<text x="{_ML + plot_w / 2:.0f}" y="{_H - 14}" text-anchor="middle" '
        f'font-size="13">Predicted class</text>'
    )
    parts.append(
        f'<text x="18" y="{_MT + plot_h / 2:.0f}" text-anchor="middle" font-size="13" '
        f'transform="rotate(-90 18 {_MT + plot_h / 2:.0f})">True class</text>'
    )
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def write_plots(report: EvaluationReport, out_dir) -> list[str]:
    out_dir = os.fspath(out_dir)
    os.makedirs(out_dir, exist_ok=True)
    written = []
    for name, text in (("roc.svg", roc_svg(report)),
                       ("confusion.svg", confusion_svg(report))):
        path = os.path.join(out_dir, name)
        tmp = path + ".tmp"
        with open(tmp, "w", encoding="utf-8") as f:
            f.write(text)
        os.replace(tmp, path)
        written.append(path)
    return written
