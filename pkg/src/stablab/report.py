"""CSV tables and dependency-free log-log SVG plots."""
from __future__ import annotations

import csv
import json
import math
import os
from xml.sax.saxutils import escape

from .smalldev import fmt

W, H = 640, 440
ML, MR, MT, MB = 70, 20, 40, 55
COLORS = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"]


def write_table(path, columns, rows):
    with open(path, "w", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(columns)
        for r in rows:
            w.writerow([fmt(v) for v in r])


def read_table(path):
    with open(path, newline="") as f:
        rows = list(csv.DictReader(f))
    cols = {}
    for r in rows:
        for k, v in r.items():
            cols.setdefault(k, []).append(v)
    return cols


def _floats(vals):
    out = []
    for v in vals:
        try:
            out.append(float(v))
        except ValueError:
            out.append(math.nan)
    return out


def _ticks(lo, hi):
    a, b = math.floor(lo), math.ceil(hi)
    step = max(1, (b - a) // 6)
    return [e for e in range(a, b + 1, step)]


def loglog_svg(series, lines=(), title="", xlabel="", ylabel=""):
    """series: dicts with label, x, y; lines: dicts with label, slope, intercept
    (log10 y = intercept + slope log10 x), optional dash. Nonpositive values are dropped."""
    pts = []
    for s in series:
        pts += [(math.log10(x), math.log10(y)) for x, y in zip(s["x"], s["y"])
                if x > 0 and y > 0 and math.isfinite(x) and math.isfinite(y)]
    if not pts:
        pts = [(0.0, 0.0), (1.0, 1.0)]
    x0, x1 = min(p[0] for p in pts), max(p[0] for p in pts)
    y0, y1 = min(p[1] for p in pts), max(p[1] for p in pts)
    if x1 - x0 < 1e-9:
        x0, x1 = x0 - 0.5, x1 + 0.5
    if y1 - y0 < 1e-9:
        y0, y1 = y0 - 0.5, y1 + 0.5
    padx, pady = 0.04 * (x1 - x0), 0.06 * (y1 - y0)
    x0, x1, y0, y1 = x0 - padx, x1 + padx, y0 - pady, y1 + pady
    sx = lambda v: ML + (v - x0) / (x1 - x0) * (W - ML - MR)
    sy = lambda v: H - MB - (v - y0) / (y1 - y0) * (H - MT - MB)

    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}" '
           f'font-family="sans-serif" font-size="12">',
           f'<rect width="{W}" height="{H}" fill="white"/>',
           f'<text x="{W / 2:.1f}" y="22" text-anchor="middle" font-size="14">{escape(title)}</text>']
    box = (ML, MT, W - ML - MR, H - MT - MB)
    out.append(f'<rect x="{box[0]}" y="{box[1]}" width="{box[2]}" height="{box[3]}" fill="none" stroke="#333"/>')
    for e in _ticks(x0, x1):
        if x0 <= e <= x1:
            X = sx(e)
            out.append(f'<line x1="{X:.1f}" y1="{MT}" x2="{X:.1f}" y2="{H - MB}" stroke="#ddd"/>')
            out.append(f'<text x="{X:.1f}" y="{H - MB + 16}" text-anchor="middle">1e{e}</text>')
    for e in _ticks(y0, y1):
        if y0 <= e <= y1:
            Y = sy(e)
            out.append(f'<line x1="{ML}" y1="{Y:.1f}" x2="{W - MR}" y2="{Y:.1f}" stroke="#ddd"/>')
            out.append(f'<text x="{ML - 6}" y="{Y + 4:.1f}" text-anchor="end">1e{e}</text>')
    out.append(f'<text x="{W / 2:.1f}" y="{H - 12}" text-anchor="middle">{escape(xlabel)}</text>')
    out.append(f'<text x="16" y="{H / 2:.1f}" text-anchor="middle" '
               f'transform="rotate(-90 16 {H / 2:.1f})">{escape(ylabel)}</text>')
    out.append(f'<clipPath id="plot"><rect x="{box[0]}" y="{box[1]}" width="{box[2]}" height="{box[3]}"/></clipPath>')

    legend = []
    for i, s in enumerate(series):
        c = COLORS[i % len(COLORS)]
        xy = [(sx(math.log10(x)), sy(math.log10(y))) for x, y in zip(s["x"], s["y"])
              if x > 0 and y > 0 and math.isfinite(x) and math.isfinite(y)]
        if s.get("style") == "line" and len(xy) > 1:
            path = " ".join(f"{X:.2f},{Y:.2f}" for X, Y in xy)
            out.append(f'<polyline points="{path}" fill="none" stroke="{c}" stroke-width="1.2" clip-path="url(#plot)"/>')
        else:
            out += [f'<circle cx="{X:.2f}" cy="{Y:.2f}" r="2.6" fill="{c}"/>' for X, Y in xy]
        legend.append((s.get("label", ""), c, None))
    for j, ln in enumerate(lines):
        c = "#000" if j == 0 else "#777"
        ya, yb = ln["intercept"] + ln["slope"] * x0, ln["intercept"] + ln["slope"] * x1
        dash = ' stroke-dasharray="6,4"' if ln.get("dash") else ""
        out.append(f'<line x1="{sx(x0):.2f}" y1="{sy(ya):.2f}" x2="{sx(x1):.2f}" y2="{sy(yb):.2f}" '
                   f'stroke="{c}" stroke-width="1.4"{dash} clip-path="url(#plot)"/>')
        legend.append((ln.get("label", ""), c, bool(ln.get("dash"))))
    for i, (label, c, dash) in enumerate(legend):
        Y = MT + 14 + 16 * i
        if dash is None:
            out.append(f'<circle cx="{ML + 14}" cy="{Y - 4}" r="3" fill="{c}"/>')
        else:
            d = ' stroke-dasharray="6,4"' if dash else ""
            out.append(f'<line x1="{ML + 6}" y1="{Y - 4}" x2="{ML + 24}" y2="{Y - 4}" stroke="{c}"{d}/>')
        out.append(f'<text x="{ML + 30}" y="{Y}">{escape(label)}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def render_plot(out_dir, plot):
    """Render one plot description (as stored in report.json) from its CSV."""
    cols = read_table(os.path.join(out_dir, plot["table"]))
    x = _floats(cols[plot["x"]])
    series = []
    for ycol in plot["y"]:
        y = _floats(cols[ycol])
        if plot.get("x_transform") == "inverse":
            xs = [1.0 / v if v else math.nan for v in x]
        else:
            xs = x
        series.append({"label": ycol, "x": xs, "y": y, "style": plot.get("style", "points")})
    svg = loglog_svg(series, plot.get("lines", []), plot.get("title", ""),
                     plot.get("xlabel", plot["x"]), plot.get("ylabel", ""))
    path = os.path.join(out_dir, plot["file"])
    with open(path, "w") as f:
        f.write(svg)
    return path


def rerender(out_dir):
    """Re-render every SVG listed in ``out_dir/report.json``."""
    with open(os.path.join(out_dir, "report.json")) as f:
        rep = json.load(f)
    return [render_plot(out_dir, p) for p in rep.get("plots", [])]
