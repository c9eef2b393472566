"""Minimal deterministic SVG line charts (no plotting dependency).

Charts are plain polylines with ticked axes and a legend; byte-identical
output for identical inputs.
"""

from __future__ import annotations

import math
from typing import List, Sequence, Tuple

Series = Tuple[str, Sequence[float], Sequence[float]]

_COLORS = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b")


def _ticks(lo: float, hi: float, target: int = 6) -> List[float]:
    if not math.isfinite(lo) or not math.isfinite(hi):
        return [0.0]
    if hi <= lo:
        hi = lo + 1.0
    raw = (hi - lo) / target
    mag = 10.0 ** math.floor(math.log10(raw))
    for mult in (1.0, 2.0, 2.5, 5.0, 10.0):
        if raw <= mult * mag:
            step = mult * mag
            break
    first = math.ceil(lo / step) * step
    out = []
    v = first
    while v <= hi + 1e-12 * step:
        out.append(0.0 if abs(v) < 1e-12 * step else v)
        v += step
    return out or [lo]


def _fmt(v: float) -> str:
    return f"{v:.6g}"


class Panel:
    """One axes region with any number of (label, x, y) series."""

    def __init__(self, title: str, xlabel: str, ylabel: str,
                 series: List[Series]):
        self.title = title
        self.xlabel = xlabel
        self.ylabel = ylabel
        self.series = series


def render(panels: List[Panel], width: int = 840, panel_height: int = 300) -> str:
    """Render stacked panels into one standalone SVG document."""
    height = panel_height * len(panels)
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" '
        f'height="{height}" viewBox="0 0 {width} {height}">',
        '<style>text{font-family:sans-serif;font-size:11px}'
        '.t{font-size:13px;font-weight:bold}</style>',
        f'<rect width="{width}" height="{height}" fill="white"/>',
    ]
    for i, panel in enumerate(panels):
        parts.append(_render_panel(panel, width, panel_height, i * panel_height))
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def _render_panel(panel: Panel, width: int, height: int, y0: int) -> str:
    ml, mr, mt, mb = 62, 150, 28, 42
    pw = width - ml - mr
    ph = height - mt - mb
    xs = [v for _, x, _ in panel.series for v in x]
    ys = [v for _, _, y in panel.series for v in y if math.isfinite(v)]
    if not xs or not ys:
        return f'<text class="t" x="{ml}" y="{y0 + 20}">{panel.title} (no data)</text>'
    x_lo, x_hi = min(xs), max(xs)
    y_lo, y_hi = min(ys), max(ys)
    if y_hi == y_lo:
        y_lo, y_hi = y_lo - 1.0, y_hi + 1.0
    pad = 0.05 * (y_hi - y_lo)
    y_lo -= pad
    y_hi += pad

    def px(v):
        return ml + (v - x_lo) / (x_hi - x_lo) * pw

    def py(v):
        return y0 + mt + (y_hi - v) / (y_hi - y_lo) * ph

    out = [f'<text class="t" x="{ml}" y="{y0 + 18}">{panel.title}</text>',
           f'<rect x="{ml}" y="{y0 + mt}" width="{pw}" height="{ph}" '
           'fill="none" stroke="#333"/>']
    for tv in _ticks(x_lo, x_hi):
        x = px(tv)
        out.append(f'<line x1="{x:.1f}" y1="{y0 + mt + ph}" x2="{x:.1f}" '
                   f'y2="{y0 + mt + ph + 4}" stroke="#333"/>')
        out.append(f'<text x="{x:.1f}" y="{y0 + mt + ph + 16}" '
                   f'text-anchor="middle">{_fmt(tv)}</text>')
    for tv in _ticks(y_lo, y_hi):
        y = py(tv)
        out.append(f'<line x1="{ml - 4}" y1="{y:.1f}" x2="{ml}" y2="{y:.1f}" '
                   'stroke="#333"/>')
        out.append(f'<text x="{ml - 7}" y="{y + 3.5:.1f}" '
                   f'text-anchor="end">{_fmt(tv)}</text>')
    out.append(f'<text x="{ml + pw / 2:.1f}" y="{y0 + height - 8}" '
               f'text-anchor="middle">{panel.xlabel}</text>')
    out.append(f'<text x="16" y="{y0 + mt + ph / 2:.1f}" text-anchor="middle" '
               f'transform="rotate(-90 16 {y0 + mt + ph / 2:.1f})">{panel.ylabel}</text>')
    for idx, (label, x, y) in enumerate(panel.series):
        color = _COLORS[idx % len(_COLORS)]
        pts = " ".join(f"{px(a):.2f},{py(b):.2f}" for a, b in zip(x, y)
                       if math.isfinite(b))
        out.append(f'<polyline points="{pts}" fill="none" stroke="{color}" '
                   'stroke-width="1.3"/>')
        ly = y0 + mt + 14 + 15 * idx
        lx = ml + pw + 8
        out.append(f'<line x1="{lx}" y1="{ly - 4}" x2="{lx + 18}" y2="{ly - 4}" '
                   f'stroke="{color}" stroke-width="2"/>')
        out.append(f'<text x="{lx + 23}" y="{ly}">{label}</text>')
    return "\n".join(out)
