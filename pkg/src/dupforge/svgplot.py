"""Minimal SVG charts (bar and line) with no plotting dependency.

Good enough for eyeballing the report histograms; anything fancier should
go through the exported CSVs.
"""

from __future__ import annotations

import math
from xml.sax.saxutils import escape

_W, _H = 640, 360
_ML, _MR, _MT, _MB = 50, 10, 30, 60


def _header(title: str) -> list[str]:
    return [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{_W}" height="{_H}" '
        f'viewBox="0 0 {_W} {_H}" font-family="sans-serif" font-size="11">',
        f'<rect width="{_W}" height="{_H}" fill="white"/>',
        f'<text x="{_W / 2}" y="18" text-anchor="middle" font-size="14">{escape(title)}</text>',
    ]


def bar_chart(labels: list[str], values: list, title: str = "", log_y: bool = False) -> str:
    values = [float(v) for v in values]
    lines = _header(title)
    if values:
        plot_w = _W - _ML - _MR
        plot_h = _H - _MT - _MB
        transformed = [math.log10(v + 1.0) if log_y else v for v in values]
        top = max(transformed) or 1.0
        bar_w = plot_w / len(values)
        for i, (label, t) in enumerate(zip(labels, transformed)):
            h = plot_h * t / top
            x = _ML + i * bar_w
            y = _MT + plot_h - h
            lines.append(
                f'<rect x="{x:.1f}" y="{y:.1f}" width="{max(bar_w - 2, 1):.1f}" '
                f'height="{h:.1f}" fill="#4472c4"/>'
            )
            if len(values) <= 40:
                lines.append(
                    f'<text x="{x + bar_w / 2:.1f}" y="{_H - _MB + 14}" text-anchor="end" '
                    f'transform="rotate(-45 {x + bar_w / 2:.1f} {_H - _MB + 14})">{escape(label)}</text>'
                )
        axis_note = "count (log scale)" if log_y else "count"
        lines.append(
            f'<text x="14" y="{_MT + plot_h / 2}" text-anchor="middle" '
            f'transform="rotate(-90 14 {_MT + plot_h / 2})">{axis_note}</text>'
        )
    lines.append("</svg>")
    return "\n".join(lines) + "\n"


def line_chart(labels: list[str], values: list, title: str = "") -> str:
    values = [float(v) for v in values]
    lines = _header(title)
    if values:
        plot_w = _W - _ML - _MR
        plot_h = _H - _MT - _MB
        top = max(values) or 1.0
        step = plot_w / max(len(values) - 1, 1)
        points = []
        for i, v in enumerate(values):
            x = _ML + i * step
            y = _MT + plot_h - plot_h * v / top
            points.append(f"{x:.1f},{y:.1f}")
        lines.append(
            f'<polyline points="{" ".join(points)}" fill="none" stroke="#c00000" stroke-width="2"/>'
        )
        stride = max(1, len(labels) // 12)
        for i in range(0, len(labels), stride):
            x = _ML + i * step
            lines.append(
                f'<text x="{x:.1f}" y="{_H - _MB + 14}" text-anchor="end" '
                f'transform="rotate(-45 {x:.1f} {_H - _MB + 14})">{escape(labels[i])}</text>'
            )
    lines.append("</svg>")
    return "\n".join(lines) + "\n"
