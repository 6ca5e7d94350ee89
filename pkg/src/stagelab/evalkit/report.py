"""CSV and hand-written SVG line charts for AUC curves."""
from __future__ import annotations

import csv
import io
import os
from xml.sax.saxutils import escape

CSV_HEADER = ("strategy", "eval_set", "epoch", "auc")
WIDTH, HEIGHT = 800, 500
MARGIN = dict(left=70, right=190, top=40, bottom=60)
PALETTE = (
    "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd",
    "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf",
)


def curves_to_csv(curves):
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_HEADER)
    for c in curves:
        for epoch, auc in c.points:
            writer.writerow((c.strategy, c.eval_set, epoch, repr(float(auc))))
    return buf.getvalue()


def _fmt(x):
    return f"{x:.2f}"


def curves_to_svg(curves, title="AUC per epoch"):
    curves = list(curves)
    pw = WIDTH - MARGIN["left"] - MARGIN["right"]
    ph = HEIGHT - MARGIN["top"] - MARGIN["bottom"]
    epochs = [e for c in curves for e in c.epochs] or [0, 1]
    e_lo, e_hi = min(epochs), max(epochs)
    if e_hi == e_lo:
        e_hi = e_lo + 1

    def px(epoch):
        return MARGIN["left"] + (epoch - e_lo) / (e_hi - e_lo) * pw

    def py(auc):
        return MARGIN["top"] + (1.0 - auc) * ph

    out = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{WIDTH}" height="{HEIGHT}" '
        f'viewBox="0 0 {WIDTH} {HEIGHT}">',
        f'<rect x="0" y="0" width="{WIDTH}" height="{HEIGHT}" fill="white"/>',
        f'<text x="{WIDTH / 2:.0f}" y="24" text-anchor="middle" font-family="sans-serif" '
        f'font-size="16">{escape(title)}</text>',
    ]
    x0, y0 = MARGIN["left"], MARGIN["top"] + ph
    out.append(f'<line x1="{x0}" y1="{y0}" x2="{x0 + pw}" y2="{y0}" stroke="black"/>')
    out.append(f'<line x1="{x0}" y1="{MARGIN["top"]}" x2="{x0}" y2="{y0}" stroke="black"/>')
    for i in range(6):
        auc = i / 5
        y = py(auc)
        out.append(f'<line x1="{x0 - 4}" y1="{_fmt(y)}" x2="{x0}" y2="{_fmt(y)}" stroke="black"/>')
        out.append(f'<text x="{x0 - 8}" y="{_fmt(y + 4)}" text-anchor="end" font-family="sans-serif" '
                   f'font-size="11">{auc:.1f}</text>')
    for i in range(6):
        epoch = e_lo + (e_hi - e_lo) * i / 5
        x = px(epoch)
        out.append(f'<line x1="{_fmt(x)}" y1="{y0}" x2="{_fmt(x)}" y2="{y0 + 4}" stroke="black"/>')
        out.append(f'<text x="{_fmt(x)}" y="{y0 + 18}" text-anchor="middle" font-family="sans-serif" '
                   f'font-size="11">{epoch:g}</text>')
    out.append(f'<text x="{x0 + pw / 2:.0f}" y="{HEIGHT - 15}" text-anchor="middle" '
               f'font-family="sans-serif" font-size="13">epoch</text>')
    out.append(f'<text x="18" y="{MARGIN["top"] + ph / 2:.0f}" text-anchor="middle" font-family="sans-serif" '
               f'font-size="13" transform="rotate(-90 18 {MARGIN["top"] + ph / 2:.0f})">AUC</text>')
    legend_x = WIDTH - MARGIN["right"] + 15
    for i, c in enumerate(curves):
        color = PALETTE[i % len(PALETTE)]
        dash = ' stroke-dasharray="6 3"' if c.eval_set == "external" else ""
        pts = " ".join(f"{_fmt(px(e))},{_fmt(py(a))}" for e, a in c.points)
        out.append(f'<polyline fill="none" stroke="{color}" stroke-width="1.5"{dash} points="{pts}"/>')
        ly = MARGIN["top"] + 10 + 18 * i
        out.append(f'<line x1="{legend_x}" y1="{ly}" x2="{legend_x + 20}" y2="{ly}" stroke="{color}" '
                   f'stroke-width="2"{dash}/>')
        out.append(f'<text x="{legend_x + 26}" y="{ly + 4}" font-family="sans-serif" font-size="11">'
                   f'{escape(c.strategy)} / {escape(c.eval_set)}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def emit(curves, fmt, path):
    """Write ``curves`` to ``path`` as CSV or SVG; identical input gives identical bytes."""
    if fmt == "csv":
        text = curves_to_csv(curves)
    elif fmt == "svg":
        text = curves_to_svg(curves)
    else:
        raise ValueError(f"unknown report format {fmt!r}")
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(text)
    return path


def emit_per_curve(curves, outdir):
    """One ``<strategy>__<evalset>.csv`` file per curve."""
    os.makedirs(outdir, exist_ok=True)
    paths = []
    for c in curves:
        path = os.path.join(outdir, f"{c.strategy}__{c.eval_set}.csv")
        paths.append(emit([c], "csv", path))
    return paths
