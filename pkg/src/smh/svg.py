"""Minimal SVG 1.1 line plots written without a plotting library."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence
from xml.sax.saxutils import escape

WIDTH, HEIGHT = 800, 600
_MARGIN = dict(left=90, right=170, top=50, bottom=70)
_COLORS = ("#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#17becf")


@dataclass(frozen=True)
class Series:
    label: str
    x: Sequence[float]
    y: Sequence[float]


class _Axis:
    def __init__(self, values, log, lo_px, hi_px):
        vals = [v for v in values if math.isfinite(v) and (v > 0 or not log)]
        if not vals:
            vals = [1.0]
        self.log = log
        t = [math.log10(v) for v in vals] if log else list(vals)
        lo, hi = min(t), max(t)
        if log:
            lo, hi = math.floor(lo), math.ceil(hi)
        if hi == lo:
            lo, hi = lo - 0.5, hi + 0.5
        elif not log:
            pad = 0.05 * (hi - lo)
            lo, hi = lo - pad, hi + pad
        self.lo, self.hi = lo, hi
        self.lo_px, self.hi_px = lo_px, hi_px

    def ok(self, v):
        return math.isfinite(v) and (v > 0 or not self.log)

    def __call__(self, v):
        t = math.log10(v) if self.log else v
        return self.lo_px + (t - self.lo) / (self.hi - self.lo) * (self.hi_px - self.lo_px)

    def ticks(self):
        if self.log:
            return [10.0 ** e for e in range(int(self.lo), int(self.hi) + 1)]
        return [self.lo + (self.hi - self.lo) * k / 5 for k in range(6)]


def _fmt(v: float) -> str:
    if v == 0:
        return "0"
    if abs(v) >= 1e4 or abs(v) < 1e-2:
        return f"{v:.0e}"
    return f"{v:.3g}"


def line_plot(series: Sequence[Series], title: str, xlabel: str, ylabel: str,
              logx: bool = False, logy: bool = False) -> str:
    """Render series as polylines with markers on a fixed 800x600 canvas."""
    m = _MARGIN
    xs = [v for s in series for v in s.x]
    ys = [v for s in series for v in s.y]
    ax = _Axis(xs, logx, m["left"], WIDTH - m["right"])
    ay = _Axis(ys, logy, HEIGHT - m["bottom"], m["top"])
    out = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{WIDTH}" '
        f'height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">',
        f'<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>',
        f'<text x="{WIDTH / 2:.1f}" y="28" text-anchor="middle" font-size="18" '
        f'font-family="sans-serif">{escape(title)}</text>',
    ]
    x0, x1 = m["left"], WIDTH - m["right"]
    y0, y1 = HEIGHT - m["bottom"], m["top"]
    out.append(f'<rect x="{x0}" y="{y1}" width="{x1 - x0}" height="{y0 - y1}" '
               'fill="none" stroke="black"/>')
    for t in ax.ticks():
        px = ax(t)
        out.append(f'<line x1="{px:.2f}" y1="{y0}" x2="{px:.2f}" y2="{y0 + 6}" stroke="black"/>')
        out.append(f'<text x="{px:.2f}" y="{y0 + 22}" text-anchor="middle" font-size="12" '
                   f'font-family="sans-serif">{escape(_fmt(t))}</text>')
    for t in ay.ticks():
        py = ay(t)
        out.append(f'<line x1="{x0 - 6}" y1="{py:.2f}" x2="{x0}" y2="{py:.2f}" stroke="black"/>')
        out.append(f'<text x="{x0 - 10}" y="{py + 4:.2f}" text-anchor="end" font-size="12" '
                   f'font-family="sans-serif">{escape(_fmt(t))}</text>')
    out.append(f'<text x="{(x0 + x1) / 2:.1f}" y="{HEIGHT - 20}" text-anchor="middle" '
               f'font-size="14" font-family="sans-serif">{escape(xlabel)}</text>')
    cy = (y0 + y1) / 2
    out.append(f'<text x="24" y="{cy:.1f}" text-anchor="middle" font-size="14" '
               f'font-family="sans-serif" transform="rotate(-90 24 {cy:.1f})">{escape(ylabel)}</text>')
    for k, s in enumerate(series):
        color = _COLORS[k % len(_COLORS)]
        pts = [(ax(a), ay(b)) for a, b in zip(s.x, s.y) if ax.ok(a) and ay.ok(b)]
        if len(pts) > 1:
            coords = " ".join(f"{a:.2f},{b:.2f}" for a, b in pts)
            out.append(f'<polyline points="{coords}" fill="none" stroke="{color}" stroke-width="2"/>')
        for a, b in pts:
            out.append(f'<circle cx="{a:.2f}" cy="{b:.2f}" r="4" fill="{color}"/>')
        ly = y1 + 20 + 22 * k
        out.append(f'<line x1="{x1 + 15}" y1="{ly}" x2="{x1 + 40}" y2="{ly}" '
                   f'stroke="{color}" stroke-width="2"/>')
        out.append(f'<text x="{x1 + 46}" y="{ly + 4}" font-size="13" '
                   f'font-family="sans-serif">{escape(s.label)}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"
