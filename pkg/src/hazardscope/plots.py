"""Minimal static SVG line charts for signals with breakpoint markers."""
from __future__ import annotations

from typing import Sequence
from xml.sax.saxutils import escape

import numpy as np


def series_svg(values: Sequence[float], breakpoints: Sequence[int] = (), title: str = "",
               width: int = 640, height: int = 200, pad: int = 24) -> str:
    v = np.asarray(values, dtype=np.float64)
    n = len(v)
    lo, hi = (float(v.min()), float(v.max())) if n else (0.0, 1.0)
    span = hi - lo or 1.0
    w, h = width - 2 * pad, height - 2 * pad

    def x(i):
        return pad + (w * i / max(n - 1, 1))

    def y(val):
        return pad + h * (1.0 - (val - lo) / span)

    points = " ".join(f"{x(i):.2f},{y(val):.2f}" for i, val in enumerate(v))
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}">',
        f'<rect x="0" y="0" width="{width}" height="{height}" fill="white"/>',
        f'<text x="{pad}" y="{pad - 8}" font-family="sans-serif" font-size="12">{escape(title)}</text>',
        f'<polyline fill="none" stroke="#1f77b4" stroke-width="1.5" points="{points}"/>',
    ]
    for b in breakpoints:
        # breakpoint b sits between samples b-1 and b
        bx = x(b - 0.5)
        parts.append(f'<line x1="{bx:.2f}" y1="{pad}" x2="{bx:.2f}" y2="{pad + h}" '
                     f'stroke="#d62728" stroke-dasharray="4,3"/>')
    parts.append("</svg>")
    return "\n".join(parts) + "\n"
