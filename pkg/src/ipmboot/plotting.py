"""Deterministic SVG and CSV emission for :class:`PlotSeries`."""

from __future__ import annotations

import csv
import io
from pathlib import Path
from xml.sax.saxutils import escape

import numpy as np

from .diagnostics import LINE, PlotSeries
from .errors import InvalidArgumentError, PlotFileError

WIDTH, HEIGHT = 800, 600
LEFT, RIGHT, TOP, BOTTOM = 80, 30, 50, 60
MARGIN = 0.05
PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#17becf")


def _range(values):
    lo, hi = min(values), max(values)
    span = hi - lo
    if span == 0:
        span = abs(lo) if lo else 1.0
        lo, hi = lo - 0.5 * span, hi + 0.5 * span
        span = hi - lo
    return lo - MARGIN * span, hi + MARGIN * span


def _fmt(v: float) -> str:
    return f"{v:.2f}"


def _tick(v: float) -> str:
    return f"{v:.4g}"


def svg_document(series, title: str | None = None) -> str:
    series = list(series)
    if not series:
        raise InvalidArgumentError("nothing to plot: empty series list")
    xs = [x for s in series for x, _ in s.points]
    ys = [y for s in series for _, y in s.points]
    x0, x1 = _range(xs)
    y0, y1 = _range(ys)
    pw, ph = WIDTH - LEFT - RIGHT, HEIGHT - TOP - BOTTOM

    def sx(x):
        return LEFT + (x - x0) / (x1 - x0) * pw

    def sy(y):
        return TOP + ph - (y - y0) / (y1 - y0) * ph

    out = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" '
        f'viewBox="0 0 {WIDTH} {HEIGHT}">',
        f'<rect x="0" y="0" width="{WIDTH}" height="{HEIGHT}" fill="white"/>',
        f'<rect x="{LEFT}" y="{TOP}" width="{pw}" height="{ph}" fill="none" stroke="black"/>',
    ]
    if title:
        out.append(f'<text x="{WIDTH / 2:.2f}" y="28" text-anchor="middle" font-size="16">{escape(title)}</text>')
    for i in range(6):
        tx = x0 + (x1 - x0) * i / 5
        ty = y0 + (y1 - y0) * i / 5
        px, py = sx(tx), sy(ty)
        out.append(f'<line x1="{_fmt(px)}" y1="{TOP + ph}" x2="{_fmt(px)}" y2="{TOP + ph + 5}" stroke="black"/>')
        out.append(f'<text x="{_fmt(px)}" y="{TOP + ph + 20}" text-anchor="middle" font-size="11">{_tick(tx)}</text>')
        out.append(f'<line x1="{LEFT - 5}" y1="{_fmt(py)}" x2="{LEFT}" y2="{_fmt(py)}" stroke="black"/>')
        out.append(f'<text x="{LEFT - 8}" y="{_fmt(py + 4)}" text-anchor="end" font-size="11">{_tick(ty)}</text>')
    xl, yl = series[0].axis_labels
    out.append(f'<text x="{LEFT + pw / 2:.2f}" y="{HEIGHT - 15}" text-anchor="middle" font-size="13">{escape(xl)}</text>')
    out.append(
        f'<text x="18" y="{TOP + ph / 2:.2f}" text-anchor="middle" font-size="13" '
        f'transform="rotate(-90 18 {TOP + ph / 2:.2f})">{escape(yl)}</text>'
    )
    for j, s in enumerate(series):
        color = PALETTE[j % len(PALETTE)]
        if s.kind == LINE:
            pts = " ".join(f"{_fmt(sx(x))},{_fmt(sy(y))}" for x, y in s.points)
            out.append(f'<polyline points="{pts}" fill="none" stroke="{color}" stroke-width="1.5"/>')
        else:
            for x, y in s.points:
                out.append(f'<circle cx="{_fmt(sx(x))}" cy="{_fmt(sy(y))}" r="3" fill="{color}"/>')
        ly = TOP + 15 + 16 * j
        out.append(f'<rect x="{LEFT + pw - 150}" y="{ly - 9}" width="10" height="10" fill="{color}"/>')
        out.append(f'<text x="{LEFT + pw - 135}" y="{ly}" font-size="11">{escape(s.name)}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def render_svg(series, path, title: str | None = None) -> Path:
    """Write a standalone 800x600 SVG; identical input gives identical bytes."""
    doc = svg_document(series, title)
    path = Path(path)
    try:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(doc)
    except OSError as exc:
        raise PlotFileError(f"cannot write {path}: {exc}") from exc
    return path


def series_to_csv(series) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["series", "x", "y"])
    for s in series:
        for x, y in s.points:
            w.writerow([s.name, repr(float(x)), repr(float(y))])
    return buf.getvalue()


def series_from_csv(text: str) -> list:
    """Inverse of :func:`series_to_csv` (kinds and axis labels are not stored)."""
    rows = list(csv.reader(io.StringIO(text)))
    if not rows or rows[0] != ["series", "x", "y"]:
        raise InvalidArgumentError("plot CSV must start with the header series,x,y")
    order, pts = [], {}
    for name, x, y in rows[1:]:
        if name not in pts:
            order.append(name)
            pts[name] = []
        pts[name].append((float(x), float(y)))
    return [PlotSeries(n, tuple(pts[n])) for n in order]


def write_series_csv(series, path) -> Path:
    path = Path(path)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(series_to_csv(series))
    return path


def _cell(v):
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return v


def write_table_csv(header, rows, path) -> Path:
    path = Path(path)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_cell(v) for v in row])
    return path
