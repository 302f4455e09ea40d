"""Minimal circular SVG diagrams for partitions of the circle."""

from __future__ import annotations

import math
from typing import Iterable

PALETTE = {
    "long": "#1f77b4",
    "short": "#ff7f0e",
    "b1": "#2ca02c",
    "b2": "#d62728",
    "b3": "#9467bd",
    "b4": "#8c564b",
    None: "#7f7f7f",
}


def _point(cx, cy, r, turn):
    angle = 2 * math.pi * turn - math.pi / 2
    return cx + r * math.cos(angle), cy + r * math.sin(angle)


def ring_svg(arcs: Iterable[tuple[float, float, str | None]], size: int = 480,
             title: str = "") -> str:
    """Draw arcs (left, length, kind) on a ring; positions are fractions of a turn."""
    cx = cy = size / 2
    r_out, r_in = size * 0.45, size * 0.33
    parts = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{size}" height="{size}" '
             f'viewBox="0 0 {size} {size}">']
    if title:
        parts.append(f'<title>{title}</title>')
    for left, length, kind in arcs:
        colour = PALETTE.get(kind, PALETTE[None])
        large = 1 if length > 0.5 else 0
        x0, y0 = _point(cx, cy, r_out, left)
        x1, y1 = _point(cx, cy, r_out, left + length)
        x2, y2 = _point(cx, cy, r_in, left + length)
        x3, y3 = _point(cx, cy, r_in, left)
        parts.append(
            f'<path d="M {x0:.3f} {y0:.3f} A {r_out:.3f} {r_out:.3f} 0 {large} 1 {x1:.3f} {y1:.3f} '
            f'L {x2:.3f} {y2:.3f} A {r_in:.3f} {r_in:.3f} 0 {large} 0 {x3:.3f} {y3:.3f} Z" '
            f'fill="{colour}" stroke="white" stroke-width="0.3"/>')
    parts.append("</svg>")
    return "\n".join(parts)


SERIES_COLOURS = ("#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b")


def decay_chart_svg(series: Iterable[tuple[str, list]], width: int = 560, height: int = 360,
                    title: str = "") -> str:
    """Log-scale plot of y_n against n; nonpositive values are left out."""
    series = [(name, [(n, y) for n, y in values if y > 0]) for name, values in series]
    points = [p for _, vals in series for p in vals]
    parts = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
             f'viewBox="0 0 {width} {height}">']
    if title:
        parts.append(f'<title>{title}</title>')
    left, right, top, bottom = 60, width - 140, 20, height - 40
    parts.append(f'<rect x="{left}" y="{top}" width="{right - left}" height="{bottom - top}" fill="none" '
                 f'stroke="black" stroke-width="0.5"/>')
    if points:
        n_lo, n_hi = min(p[0] for p in points), max(p[0] for p in points)
        l_lo = math.floor(min(math.log10(p[1]) for p in points))
        l_hi = math.ceil(max(math.log10(p[1]) for p in points))
        n_hi = n_hi if n_hi > n_lo else n_lo + 1
        l_hi = l_hi if l_hi > l_lo else l_lo + 1

        def xy(n, y):
            x = left + (right - left) * (n - n_lo) / (n_hi - n_lo)
            v = bottom - (bottom - top) * (math.log10(y) - l_lo) / (l_hi - l_lo)
            return x, v

        for e in range(l_lo, l_hi + 1):
            _, v = xy(n_lo, 10.0 ** e)
            parts.append(f'<text x="{left - 6}" y="{v:.2f}" font-size="10" text-anchor="end">1e{e}</text>')
        for n in range(n_lo, n_hi + 1):
            x, _ = xy(n, 10.0 ** l_lo)
            parts.append(f'<text x="{x:.2f}" y="{bottom + 14}" font-size="10" text-anchor="middle">{n}</text>')
        for k, (name, vals) in enumerate(series):
            colour = SERIES_COLOURS[k % len(SERIES_COLOURS)]
            if vals:
                path = " ".join(f"{'M' if j == 0 else 'L'} {x:.2f} {v:.2f}"
                                for j, (x, v) in enumerate(xy(n, y) for n, y in vals))
                parts.append(f'<path d="{path}" fill="none" stroke="{colour}" stroke-width="1.5"/>')
            parts.append(f'<text x="{right + 10}" y="{top + 14 * (k + 1)}" font-size="11" '
                         f'fill="{colour}">{name}</text>')
    parts.append("</svg>")
    return "\n".join(parts)
