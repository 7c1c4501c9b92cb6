"""Minimal static SVG charts: polyline plots and boxplots.

Emitted directly as SVG 1.1 text so the artifact carries no plotting
dependency; CSV files remain the canonical output for analysis.
"""

from __future__ import annotations

import math
from xml.sax.saxutils import escape

import numpy as np

WIDTH, HEIGHT = 720, 480
MARGIN_L, MARGIN_R, MARGIN_T, MARGIN_B = 70, 20, 40, 50
PALETTE = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e",
           "#8c564b", "#17becf", "#7f7f7f"]


def _nice_step(span: float, target: int = 6) -> float:
    raw = span / max(target, 1)
    mag = 10.0 ** math.floor(math.log10(raw)) if raw > 0 else 1.0
    for mult in (1.0, 2.0, 5.0, 10.0):
        if raw <= mult * mag:
            return mult * mag
    return 10.0 * mag


def _ticks(lo: float, hi: float) -> list[float]:
    if not math.isfinite(lo) or not math.isfinite(hi) or hi <= lo:
        return [lo]
    step = _nice_step(hi - lo)
    first = math.ceil(lo / step) * step
    out = []
    v = first
    while v <= hi + 1e-12 * step:
        out.append(0.0 if abs(v) < 1e-12 * step else v)
        v += step
    return out


def _fmt(v: float) -> str:
    if v == 0:
        return "0"
    if abs(v) >= 1e4 or abs(v) < 1e-3:
        return f"{v:.1e}"
    return f"{v:.4g}"


class _Axes:
    def __init__(self, x_lo, x_hi, y_lo, y_hi, log_y):
        self.x_lo, self.x_hi = x_lo, x_hi
        self.y_lo, self.y_hi = y_lo, y_hi
        self.log_y = log_y

    def px(self, x: float) -> float:
        span = self.x_hi - self.x_lo or 1.0
        return MARGIN_L + (x - self.x_lo) / span * (WIDTH - MARGIN_L - MARGIN_R)

    def py(self, y: float) -> float:
        if self.log_y:
            y = math.log10(y)
        span = self.y_hi - self.y_lo or 1.0
        frac = (y - self.y_lo) / span
        return HEIGHT - MARGIN_B - frac * (HEIGHT - MARGIN_T - MARGIN_B)

    def y_tick_values(self):
        if self.log_y:
            lo, hi = math.floor(self.y_lo), math.ceil(self.y_hi)
            return [(10.0 ** d, f"1e{d:d}") for d in range(int(lo), int(hi) + 1)]
        return [(v, _fmt(v)) for v in _ticks(self.y_lo, self.y_hi)]


def _header(title: str) -> list[str]:
    parts = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" '
             f'height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">',
             f'<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>']
    if title:
        parts.append(f'<text x="{WIDTH / 2}" y="24" text-anchor="middle" '
                     f'font-family="sans-serif" font-size="15">{escape(title)}</text>')
    return parts


def _axes_svg(ax: _Axes, x_label: str, y_label: str) -> list[str]:
    parts = []
    x0, y0 = MARGIN_L, HEIGHT - MARGIN_B
    x1, y1 = WIDTH - MARGIN_R, MARGIN_T
    parts.append(f'<line x1="{x0}" y1="{y0}" x2="{x1}" y2="{y0}" stroke="black"/>')
    parts.append(f'<line x1="{x0}" y1="{y0}" x2="{x0}" y2="{y1}" stroke="black"/>')
    for v in _ticks(ax.x_lo, ax.x_hi):
        px = ax.px(v)
        parts.append(f'<line x1="{px:.1f}" y1="{y0}" x2="{px:.1f}" y2="{y0 + 4}" '
                     'stroke="black"/>')
        parts.append(f'<text x="{px:.1f}" y="{y0 + 18}" text-anchor="middle" '
                     f'font-family="sans-serif" font-size="11">{_fmt(v)}</text>')
    for v, label in ax.y_tick_values():
        py = ax.py(v)
        parts.append(f'<line x1="{x0 - 4}" y1="{py:.1f}" x2="{x0}" y2="{py:.1f}" '
                     'stroke="black"/>')
        parts.append(f'<text x="{x0 - 7}" y="{py + 4:.1f}" text-anchor="end" '
                     f'font-family="sans-serif" font-size="11">{escape(label)}</text>')
    if x_label:
        parts.append(f'<text x="{(x0 + x1) / 2}" y="{HEIGHT - 12}" text-anchor="middle" '
                     f'font-family="sans-serif" font-size="13">{escape(x_label)}</text>')
    if y_label:
        parts.append(f'<text x="16" y="{(y0 + y1) / 2}" text-anchor="middle" '
                     f'font-family="sans-serif" font-size="13" '
                     f'transform="rotate(-90 16 {(y0 + y1) / 2})">{escape(y_label)}</text>')
    return parts


def line_chart(path, curves, title="", x_label="", y_label="",
               log_y=False, annotations=()) -> None:
    """Write a polyline chart.

    ``curves`` is an iterable of (x, y, label, color_index) tuples; points
    with NaN (or non-positive y on a log axis) are dropped.  Labels may be
    None to keep a curve out of the legend.
    """
    cleaned = []
    for x, y, label, color in curves:
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        keep = np.isfinite(x) & np.isfinite(y)
        if log_y:
            keep &= y > 0
        if keep.any():
            cleaned.append((x[keep], y[keep], label, color))
    if not cleaned:
        raise ValueError("no plottable data")

    x_lo = min(float(x.min()) for x, *_ in cleaned)
    x_hi = max(float(x.max()) for x, *_ in cleaned)
    ys = np.concatenate([y for _, y, *_ in cleaned])
    if log_y:
        y_lo, y_hi = math.log10(ys.min()), math.log10(ys.max())
    else:
        y_lo, y_hi = float(ys.min()), float(ys.max())
        if y_lo == y_hi:
            y_lo, y_hi = y_lo - 1.0, y_hi + 1.0
        pad = 0.05 * (y_hi - y_lo)
        y_lo, y_hi = y_lo - pad, y_hi + pad
    ax = _Axes(x_lo, x_hi, y_lo, y_hi, log_y)

    parts = _header(title) + _axes_svg(ax, x_label, y_label)
    legend = []
    for x, y, label, color in cleaned:
        col = PALETTE[color % len(PALETTE)]
        pts = " ".join(f"{ax.px(float(xi)):.1f},{ax.py(float(yi)):.1f}"
                       for xi, yi in zip(x, y))
        parts.append(f'<polyline points="{pts}" fill="none" stroke="{col}" '
                     'stroke-width="1.2"/>')
        if label is not None and label not in (l for l, _ in legend):
            legend.append((label, col))
    for i, (label, col) in enumerate(legend):
        ly = MARGIN_T + 14 + 16 * i
        lx = WIDTH - MARGIN_R - 150
        parts.append(f'<line x1="{lx}" y1="{ly - 4}" x2="{lx + 22}" y2="{ly - 4}" '
                     f'stroke="{col}" stroke-width="2"/>')
        parts.append(f'<text x="{lx + 28}" y="{ly}" font-family="sans-serif" '
                     f'font-size="12">{escape(label)}</text>')
    for i, note in enumerate(annotations):
        parts.append(f'<text x="{MARGIN_L + 8}" y="{MARGIN_T + 14 + 16 * i}" '
                     f'font-family="sans-serif" font-size="12">{escape(note)}</text>')
    parts.append("</svg>")
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(parts) + "\n")


def box_chart(path, groups, title="", y_label="") -> None:
    """Write a boxplot: median, quartiles, 1.5 IQR whiskers, outlier dots."""
    groups = [(label, np.asarray(vals, dtype=float)) for label, vals in groups]
    if not groups or any(v.size == 0 for _, v in groups):
        raise ValueError("boxplot needs non-empty groups")
    all_vals = np.concatenate([v for _, v in groups])
    y_lo, y_hi = float(all_vals.min()), float(all_vals.max())
    if y_lo == y_hi:
        y_lo, y_hi = y_lo - 1.0, y_hi + 1.0
    pad = 0.08 * (y_hi - y_lo)
    ax = _Axes(0.0, float(len(groups)), y_lo - pad, y_hi + pad, log_y=False)

    parts = _header(title) + _axes_svg(ax, "", y_label)
    # group labels replace numeric x ticks
    parts = [p for p in parts if "text-anchor=\"middle\" font-family=\"sans-serif\" "
             "font-size=\"11\"" not in p]
    width = 0.5
    for i, (label, vals) in enumerate(groups):
        q1, med, q3 = np.percentile(vals, [25, 50, 75])
        iqr = q3 - q1
        lo_w = vals[vals >= q1 - 1.5 * iqr].min()
        hi_w = vals[vals <= q3 + 1.5 * iqr].max()
        outliers = vals[(vals < q1 - 1.5 * iqr) | (vals > q3 + 1.5 * iqr)]
        cx = i + 0.5
        x_l, x_r = ax.px(cx - width / 2), ax.px(cx + width / 2)
        px_c = ax.px(cx)
        col = PALETTE[i % len(PALETTE)]
        parts.append(f'<rect x="{x_l:.1f}" y="{ax.py(q3):.1f}" '
                     f'width="{x_r - x_l:.1f}" height="{ax.py(q1) - ax.py(q3):.1f}" '
                     f'fill="{col}" fill-opacity="0.25" stroke="{col}"/>')
        parts.append(f'<line x1="{x_l:.1f}" y1="{ax.py(med):.1f}" x2="{x_r:.1f}" '
                     f'y2="{ax.py(med):.1f}" stroke="{col}" stroke-width="2"/>')
        for w_val, q in ((lo_w, q1), (hi_w, q3)):
            parts.append(f'<line x1="{px_c:.1f}" y1="{ax.py(q):.1f}" '
                         f'x2="{px_c:.1f}" y2="{ax.py(w_val):.1f}" stroke="{col}"/>')
            parts.append(f'<line x1="{ax.px(cx - 0.15):.1f}" y1="{ax.py(w_val):.1f}" '
                         f'x2="{ax.px(cx + 0.15):.1f}" y2="{ax.py(w_val):.1f}" '
                         f'stroke="{col}"/>')
        for v in outliers:
            parts.append(f'<circle cx="{px_c:.1f}" cy="{ax.py(v):.1f}" r="2.5" '
                         f'fill="none" stroke="{col}"/>')
        parts.append(f'<text x="{px_c:.1f}" y="{HEIGHT - MARGIN_B + 18}" '
                     f'text-anchor="middle" font-family="sans-serif" '
                     f'font-size="12">{escape(str(label))}</text>')
    parts.append("</svg>")
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(parts) + "\n")
