"""Minimal deterministic SVG charts.

Output depends only on the input values: fixed canvas, fixed palette,
coordinates printed with two decimals. Two runs on the same data produce
byte-identical files.
"""

from __future__ import annotations

import math
from datetime import date
from html import escape
from typing import Optional, Sequence

WIDTH, HEIGHT = 860, 420
LEFT, RIGHT, TOP, BOTTOM = 70, 20, 40, 60
PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#17becf", "#7f7f7f")


def _f(x: float) -> str:
    return f"{x:.2f}"


def nice_ticks(lo: float, hi: float, target: int = 6) -> list:
    if not (math.isfinite(lo) and math.isfinite(hi)):
        return [0.0]
    if hi - lo < 1e-12:
        lo, hi = lo - 0.5, hi + 0.5
    raw = (hi - lo) / target
    mag = 10 ** math.floor(math.log10(raw))
    step = next(m * mag for m in (1, 2, 2.5, 5, 10) if m * mag >= raw)
    first = math.floor(lo / step)
    last = math.ceil(hi / step)
    return [round(k * step, 12) for k in range(first, last + 1)]


class _Frame:
    def __init__(self, x_lo, x_hi, y_lo, y_hi):
        self.x_lo, self.x_hi = x_lo, (x_hi if x_hi > x_lo else x_lo + 1)
        self.y_lo, self.y_hi = y_lo, (y_hi if y_hi > y_lo else y_lo + 1)

    def x(self, v):
        return LEFT + (v - self.x_lo) / (self.x_hi - self.x_lo) * (WIDTH - LEFT - RIGHT)

    def y(self, v):
        return HEIGHT - BOTTOM - (v - self.y_lo) / (self.y_hi - self.y_lo) * (HEIGHT - TOP - BOTTOM)


def _header(title: str) -> list:
    return [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" '
        'font-family="sans-serif" font-size="11">',
        f'<rect x="0" y="0" width="{WIDTH}" height="{HEIGHT}" fill="white"/>',
        f'<text x="{WIDTH / 2:.2f}" y="22" text-anchor="middle" font-size="14">{escape(title)}</text>',
    ]


def _y_axis(frame: _Frame, ticks, percent: bool) -> list:
    out = []
    for t in ticks:
        y = _f(frame.y(t))
        label = f"{t * 100:g}%" if percent else f"{t:g}"
        out.append(f'<line x1="{LEFT}" y1="{y}" x2="{WIDTH - RIGHT}" y2="{y}" stroke="#e0e0e0"/>')
        out.append(f'<text x="{LEFT - 6}" y="{y}" text-anchor="end" dominant-baseline="middle">{escape(label)}</text>')
    if ticks[0] < 0 < ticks[-1]:
        y = _f(frame.y(0))
        out.append(f'<line x1="{LEFT}" y1="{y}" x2="{WIDTH - RIGHT}" y2="{y}" stroke="#404040"/>')
    out.append(
        f'<rect x="{LEFT}" y="{TOP}" width="{WIDTH - LEFT - RIGHT}" height="{HEIGHT - TOP - BOTTOM}" '
        'fill="none" stroke="#404040"/>'
    )
    return out


def line_chart(
    series: Sequence[tuple],
    title: str,
    onset: Optional[date] = None,
    percent: bool = True,
) -> str:
    """Plot ``(label, dates, values)`` lines against calendar dates.

    ``onset`` draws a dashed vertical marker.
    """
    all_dates = [d for _, dates, _ in series for d in dates]
    all_vals = [v for _, _, vals in series for v in vals if math.isfinite(v)]
    if not all_dates:
        raise ValueError("nothing to plot")
    d0 = min(all_dates).toordinal()
    d1 = max(all_dates).toordinal()
    ticks = nice_ticks(min(all_vals, default=0.0), max(all_vals, default=0.0))
    frame = _Frame(d0, d1, ticks[0], ticks[-1])

    out = _header(title) + _y_axis(frame, ticks, percent)
    for o in range(d0, d1 + 1):
        day = date.fromordinal(o)
        if day.day == 1:
            x = _f(frame.x(o))
            out.append(f'<line x1="{x}" y1="{HEIGHT - BOTTOM}" x2="{x}" y2="{HEIGHT - BOTTOM + 5}" stroke="#404040"/>')
            out.append(f'<text x="{x}" y="{HEIGHT - BOTTOM + 18}" text-anchor="middle">{day.strftime("%b %Y")}</text>')
    for k, (label, dates, vals) in enumerate(series):
        color = PALETTE[k % len(PALETTE)]
        pts = " ".join(f"{_f(frame.x(d.toordinal()))},{_f(frame.y(v))}" for d, v in zip(dates, vals) if math.isfinite(v))
        out.append(f'<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{pts}"/>')
        ly = TOP + 14 + 14 * k
        out.append(f'<line x1="{LEFT + 10}" y1="{ly}" x2="{LEFT + 30}" y2="{ly}" stroke="{color}" stroke-width="2"/>')
        out.append(f'<text x="{LEFT + 36}" y="{ly}" dominant-baseline="middle">{escape(label)}</text>')
    if onset is not None and d0 <= onset.toordinal() <= d1:
        x = _f(frame.x(onset.toordinal()))
        out.append(
            f'<line class="onset" x1="{x}" y1="{TOP}" x2="{x}" y2="{HEIGHT - BOTTOM}" '
            'stroke="black" stroke-dasharray="6,4"/>'
        )
    out.append("</svg>")
    return "\n".join(out) + "\n"


def grouped_bar_chart(groups: Sequence[tuple], title: str, percent: bool = True) -> str:
    """Bars for ``(group_label, [(bar_label, value), ...])`` entries."""
    if not groups:
        raise ValueError("nothing to plot")
    vals = [v for _, bars in groups for _, v in bars] + [0.0]
    ticks = nice_ticks(min(vals), max(vals))
    frame = _Frame(0, len(groups), ticks[0], ticks[-1])
    bar_labels = []
    for _, bars in groups:
        for name, _ in bars:
            if name not in bar_labels:
                bar_labels.append(name)

    out = _header(title) + _y_axis(frame, ticks, percent)
    slot = (WIDTH - LEFT - RIGHT) / len(groups)
    width = slot * 0.8 / max(1, len(bar_labels))
    for g, (group, bars) in enumerate(groups):
        x0 = frame.x(g) + slot * 0.1
        for name, v in bars:
            k = bar_labels.index(name)
            y_top, y_base = frame.y(max(v, 0.0)), frame.y(min(v, 0.0))
            out.append(
                f'<rect x="{_f(x0 + k * width)}" y="{_f(y_top)}" width="{_f(width)}" height="{_f(y_base - y_top)}" '
                f'fill="{PALETTE[k % len(PALETTE)]}"><title>{escape(f"{group} {name}: {v:.4f}")}</title></rect>'
            )
        out.append(
            f'<text x="{_f(frame.x(g) + slot / 2)}" y="{HEIGHT - BOTTOM + 18}" text-anchor="middle">{escape(group)}</text>'
        )
    for k, name in enumerate(bar_labels):
        ly = TOP + 14 + 14 * k
        out.append(f'<rect x="{LEFT + 10}" y="{ly - 5}" width="20" height="10" fill="{PALETTE[k % len(PALETTE)]}"/>')
        out.append(f'<text x="{LEFT + 36}" y="{ly}" dominant-baseline="middle">{escape(name)}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"
