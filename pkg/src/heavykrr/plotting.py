"""Static SVG line plots, written by hand so output is byte-stable."""

from __future__ import annotations

import math
from typing import Sequence
from xml.sax.saxutils import escape

from .harness import QuantileTable

PALETTE = ["#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f"]

WIDTH, HEIGHT = 420, 300
LEFT, RIGHT, TOP, BOTTOM = 60, 110, 30, 45


def _num(x: float) -> str:
    return f"{x:.2f}"


def _ticks(lo: float, hi: float, log: bool) -> list[float]:
    if log:
        return [10.0**e for e in range(math.floor(lo), math.ceil(hi) + 1) if lo <= e <= hi]
    step = 10 ** math.floor(math.log10((hi - lo) / 2)) if hi > lo else 1.0
    start = math.ceil(lo / step) * step
    out, v = [], start
    while v <= hi + 1e-12 and len(out) < 12:
        out.append(round(v, 10))
        v += step
    return out


def _panel(
    series: Sequence[tuple[str, Sequence[float], Sequence[float]]],
    title: str,
    xlabel: str,
    ylabel: str,
    log_x: bool,
    log_y: bool,
    x0: float,
) -> list[str]:
    def tx(v):
        return math.log10(v) if log_x else v

    def ty(v):
        return math.log10(v) if log_y else v

    pts = [
        (tx(x), ty(y))
        for _, xs, ys in series
        for x, y in zip(xs, ys)
        if math.isfinite(x) and math.isfinite(y) and (not log_y or y > 0) and (not log_x or x > 0)
    ]
    if not pts:
        pts = [(0.0, 0.0), (1.0, 1.0)]
    xmin, xmax = min(p[0] for p in pts), max(p[0] for p in pts)
    ymin, ymax = min(p[1] for p in pts), max(p[1] for p in pts)
    if xmax == xmin:
        xmin, xmax = xmin - 0.5, xmax + 0.5
    if ymax == ymin:
        ymin, ymax = ymin - 0.5, ymax + 0.5
    pw, ph = WIDTH - LEFT - RIGHT, HEIGHT - TOP - BOTTOM

    def sx(v):
        return x0 + LEFT + (v - xmin) / (xmax - xmin) * pw

    def sy(v):
        return TOP + ph - (v - ymin) / (ymax - ymin) * ph

    out = [
        f'<rect x="{_num(x0 + LEFT)}" y="{TOP}" width="{pw}" height="{ph}" fill="none" stroke="#000"/>',
        f'<text x="{_num(x0 + LEFT + pw / 2)}" y="18" text-anchor="middle" font-size="13">{escape(title)}</text>',
        f'<text x="{_num(x0 + LEFT + pw / 2)}" y="{HEIGHT - 8}" text-anchor="middle" font-size="11">{escape(xlabel)}</text>',
        f'<text x="{_num(x0 + 14)}" y="{_num(TOP + ph / 2)}" text-anchor="middle" font-size="11" '
        f'transform="rotate(-90 {_num(x0 + 14)} {_num(TOP + ph / 2)})">{escape(ylabel)}</text>',
    ]
    for v in _ticks(xmin, xmax, log_x):
        label = f"1e{round(v)}" if log_x else f"{v:g}"
        out.append(f'<line x1="{_num(sx(v))}" y1="{TOP + ph}" x2="{_num(sx(v))}" y2="{TOP + ph + 4}" stroke="#000"/>')
        out.append(f'<text x="{_num(sx(v))}" y="{TOP + ph + 16}" text-anchor="middle" font-size="10">{label}</text>')
    for v in _ticks(ymin, ymax, log_y):
        label = f"1e{round(v)}" if log_y else f"{v:g}"
        out.append(f'<line x1="{_num(x0 + LEFT - 4)}" y1="{_num(sy(v))}" x2="{_num(x0 + LEFT)}" y2="{_num(sy(v))}" stroke="#000"/>')
        out.append(f'<text x="{_num(x0 + LEFT - 6)}" y="{_num(sy(v) + 3)}" text-anchor="end" font-size="10">{label}</text>')
    for i, (name, xs, ys) in enumerate(series):
        color = PALETTE[i % len(PALETTE)]
        coords = " ".join(
            f"{_num(sx(tx(x)))},{_num(sy(ty(y)))}"
            for x, y in zip(xs, ys)
            if math.isfinite(x) and math.isfinite(y) and (not log_y or y > 0) and (not log_x or x > 0)
        )
        out.append(f'<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{coords}"/>')
        ly = TOP + 10 + 14 * i
        out.append(f'<line x1="{_num(x0 + WIDTH - RIGHT + 8)}" y1="{ly}" x2="{_num(x0 + WIDTH - RIGHT + 24)}" y2="{ly}" stroke="{color}" stroke-width="2"/>')
        out.append(f'<text x="{_num(x0 + WIDTH - RIGHT + 28)}" y="{ly + 4}" font-size="10">{escape(name)}</text>')
    return out


def _document(panels: list[list[str]]) -> str:
    width = WIDTH * len(panels)
    body = "\n".join(line for p in panels for line in p)
    return (
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{HEIGHT}" '
        f'viewBox="0 0 {width} {HEIGHT}" font-family="sans-serif">\n'
        f'<rect width="{width}" height="{HEIGHT}" fill="#fff"/>\n{body}\n</svg>\n'
    )


def quantile_svg(table: QuantileTable, log_y: bool = False) -> str:
    """One panel per noise model, one polyline per alpha: level on x, quantile on y."""
    noises = list(dict.fromkeys(r.noise for r in table.rows))
    panels = []
    for i, noise in enumerate(noises):
        alphas = list(dict.fromkeys(r.alpha for r in table.rows if r.noise == noise))
        series = []
        for a in alphas:
            rows = [r for r in table.rows if r.noise == noise and r.alpha == a]
            series.append((f"alpha={a:g}", [r.level for r in rows], [r.quantile for r in rows]))
        panels.append(_panel(series, noise, "confidence level 1-delta", "excess risk quantile", False, log_y, WIDTH * i))
    return _document(panels)


def n0_svg(curves: dict[str, tuple[Sequence[float], Sequence[float]]]) -> str:
    """Effective sample size against confidence level, log-y."""
    series = [(name, xs, ys) for name, (xs, ys) in curves.items()]
    return _document([_panel(series, "effective sample size n0", "1-delta", "n0", False, True, 0)])
