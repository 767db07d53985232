"""Minimal deterministic SVG line plots (linear or log-log axes)."""
from __future__ import annotations

import math
from typing import Mapping, Sequence

from .errors import DomainError

WIDTH, HEIGHT = 720, 480
MARGIN = dict(left=70, right=150, top=40, bottom=55)
PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#e377c2", "#17becf")


def _nice_ticks(lo: float, hi: float, count: int = 5) -> list[float]:
    if hi == lo:
        return [lo]
    raw = (hi - lo) / count
    mag = 10 ** math.floor(math.log10(raw))
    step = next(m * mag for m in (1, 2, 2.5, 5, 10) if m * mag >= raw)
    # index ticks by integer so a step below one ulp of lo cannot stall
    k0 = math.ceil(lo / step)
    ticks = []
    for i in range(count + 2):
        v = (k0 + i) * step
        if v > hi:
            break
        ticks.append(v)
    return ticks


def _log_ticks(lo: float, hi: float) -> list[float]:
    """lo, hi are log10 values."""
    ticks = list(range(math.ceil(lo - 1e-12), math.floor(hi + 1e-12) + 1))
    if len(ticks) < 2:
        return _nice_ticks(lo, hi, 4)
    return [float(t) for t in ticks]


def _label(v: float, log: bool) -> str:
    if log:
        return f"{10 ** v:g}"
    return f"{v:g}"


def emit_svg(
    series: Mapping[str, Sequence[tuple[float, float]]],
    mode: str = "linear",
    path=None,
    title: str = "",
    xlabel: str = "",
    ylabel: str = "",
) -> str:
    """Render named (x, y) series as polylines; write to ``path`` if given.

    Output depends only on the input, so re-running gives identical bytes.
    """
    if mode not in ("linear", "loglog"):
        raise DomainError(f"unknown mode {mode!r}")
    items = [(name, list(pts)) for name, pts in series.items()]
    if not items or all(not pts for _, pts in items):
        raise DomainError("nothing to plot")
    log = mode == "loglog"
    tx = []
    for name, pts in items:
        if log and any(x <= 0 or y <= 0 for x, y in pts):
            raise DomainError(f"series {name!r} has non-positive values on log-log axes")
        tx.append((name, [(math.log10(x), math.log10(y)) if log else (float(x), float(y)) for x, y in pts]))
    xs = [p[0] for _, pts in tx for p in pts]
    ys = [p[1] for _, pts in tx for p in pts]
    x_lo, x_hi = min(xs), max(xs)
    y_lo, y_hi = min(ys), max(ys)
    if x_hi == x_lo:
        x_lo, x_hi = x_lo - 0.5, x_hi + 0.5
    if y_hi == y_lo:
        y_lo, y_hi = y_lo - 0.5, y_hi + 0.5
    pw = WIDTH - MARGIN["left"] - MARGIN["right"]
    ph = HEIGHT - MARGIN["top"] - MARGIN["bottom"]

    def sx(v):
        return MARGIN["left"] + (v - x_lo) / (x_hi - x_lo) * pw

    def sy(v):
        return MARGIN["top"] + (1 - (v - y_lo) / (y_hi - y_lo)) * ph

    out = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{WIDTH}" height="{HEIGHT}" '
        f'viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">',
        f'<rect x="0" y="0" width="{WIDTH}" height="{HEIGHT}" fill="white"/>',
    ]
    if title:
        out.append(f'<text x="{WIDTH / 2:.1f}" y="22" text-anchor="middle" font-size="14">{_esc(title)}</text>')
    x0, y0 = MARGIN["left"], MARGIN["top"] + ph
    out.append(f'<rect x="{x0}" y="{MARGIN["top"]}" width="{pw}" height="{ph}" fill="none" stroke="black"/>')
    xt = _log_ticks(x_lo, x_hi) if log else _nice_ticks(x_lo, x_hi)
    yt = _log_ticks(y_lo, y_hi) if log else _nice_ticks(y_lo, y_hi)
    for v in xt:
        if x_lo <= v <= x_hi:
            px = sx(v)
            out.append(f'<line x1="{px:.2f}" y1="{y0}" x2="{px:.2f}" y2="{y0 + 5}" stroke="black"/>')
            out.append(f'<text x="{px:.2f}" y="{y0 + 18}" text-anchor="middle">{_label(v, log)}</text>')
    for v in yt:
        if y_lo <= v <= y_hi:
            py = sy(v)
            out.append(f'<line x1="{x0 - 5}" y1="{py:.2f}" x2="{x0}" y2="{py:.2f}" stroke="black"/>')
            out.append(f'<text x="{x0 - 8}" y="{py + 4:.2f}" text-anchor="end">{_label(v, log)}</text>')
    if xlabel:
        out.append(f'<text x="{x0 + pw / 2:.1f}" y="{HEIGHT - 12}" text-anchor="middle">{_esc(xlabel)}</text>')
    if ylabel:
        cy = MARGIN["top"] + ph / 2
        out.append(f'<text x="16" y="{cy:.1f}" text-anchor="middle" transform="rotate(-90 16 {cy:.1f})">'
                   f'{_esc(ylabel)}</text>')
    for k, (name, pts) in enumerate(tx):
        color = PALETTE[k % len(PALETTE)]
        coords = " ".join(f"{sx(a):.2f},{sy(b):.2f}" for a, b in pts)
        if len(pts) == 1:
            a, b = pts[0]
            out.append(f'<circle cx="{sx(a):.2f}" cy="{sy(b):.2f}" r="3" fill="{color}"/>')
        elif pts:
            out.append(f'<polyline points="{coords}" fill="none" stroke="{color}" stroke-width="1.5"/>')
        ly = MARGIN["top"] + 14 + 18 * k
        lx = WIDTH - MARGIN["right"] + 12
        out.append(f'<line x1="{lx}" y1="{ly - 4}" x2="{lx + 20}" y2="{ly - 4}" stroke="{color}" stroke-width="2"/>')
        out.append(f'<text x="{lx + 26}" y="{ly}">{_esc(str(name))}</text>')
    out.append("</svg>")
    doc = "\n".join(out) + "\n"
    if path is not None:
        with open(path, "w", newline="\n") as fh:
            fh.write(doc)
    return doc


def _esc(s: str) -> str:
    return s.replace("&", "&amp;").replace("<", "&lt;").replace(">", "&gt;")
