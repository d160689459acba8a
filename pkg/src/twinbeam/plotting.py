"""Self-contained SVG plot of a block series.

The plot shows ``n_d`` and ``n_corr`` against the transmittance ``T`` with
the single-mode reference line through the open-iris point. Each CSV row is
one ``<g class="row">`` element whose ``data-*`` attributes carry the row
values verbatim, so the figure can be checked against (or converted back
to) the table.
"""
from __future__ import annotations

import math
from xml.sax.saxutils import escape, quoteattr

import numpy as np

from .acquisition import BLOCK_COLUMNS

WIDTH, HEIGHT = 640, 420
LEFT, RIGHT, TOP, BOTTOM = 70, 20, 30, 50
COLORS = {"n_d": "#1f77b4", "n_corr": "#d62728", "ref": "#555555"}


def _fmt(x) -> str:
    return repr(float(x))


def _scatter(series, column):
    """Block-to-block scatter of ``column`` around a straight line in T."""
    y = getattr(series, column)
    ok = np.asarray(series.valid, bool) & np.isfinite(y)
    if ok.sum() < 3:
        return 0.0
    coef = np.polyfit(series.T[ok], y[ok], 1)
    res = y[ok] - np.polyval(coef, series.T[ok])
    return float(np.std(res, ddof=2))


def _ticks(lo, hi, n=5):
    return [lo + (hi - lo) * k / n for k in range(n + 1)]


def series_svg(series, title: str = "") -> str:
    """SVG document for ``series`` (a BlockSeries)."""
    T = np.asarray(series.T, float)
    cols = {c: np.asarray(getattr(series, c), float) for c in ("n_d", "n_corr")}
    valid = np.asarray(series.valid, bool)
    # axis range from valid blocks only; dark blocks may blow up
    shown = [v[valid & np.isfinite(v)] for v in cols.values()]
    finite = np.concatenate(shown + [np.array([0.0, 1.0])])
    ylo = math.floor(min(finite.min(), 0.0) * 5) / 5
    yhi = math.ceil(max(finite.max(), 1.0) * 5) / 5
    if yhi <= ylo:
        yhi = ylo + 1.0
    pw, ph = WIDTH - LEFT - RIGHT, HEIGHT - TOP - BOTTOM

    def px(t):
        return LEFT + pw * float(t)

    def py(v):
        v = min(max(float(v), ylo), yhi)
        return TOP + ph * (yhi - v) / (yhi - ylo)

    err = {c: _scatter(series, c) for c in cols}
    out = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" '
        f'viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">',
        f"<title>{escape(title or 'noise versus transmittance')}</title>",
        f'<rect x="{LEFT}" y="{TOP}" width="{pw}" height="{ph}" fill="none" stroke="black"/>',
    ]
    for t in _ticks(0.0, 1.0):
        out.append(f'<text x="{px(t):.1f}" y="{TOP + ph + 18}" text-anchor="middle">{t:.1f}</text>')
    for v in _ticks(ylo, yhi):
        out.append(f'<text x="{LEFT - 8}" y="{py(v) + 4:.1f}" text-anchor="end">{v:.2f}</text>')
        out.append(f'<line x1="{LEFT}" y1="{py(v):.1f}" x2="{LEFT + pw}" y2="{py(v):.1f}" '
                   'stroke="#dddddd"/>')
    out.append(f'<text x="{LEFT + pw / 2}" y="{HEIGHT - 10}" text-anchor="middle">T</text>')
    out.append(f'<text x="16" y="{TOP + ph / 2}" text-anchor="middle" '
               f'transform="rotate(-90 16 {TOP + ph / 2})">normalized noise</text>')

    # single-mode reference: 1 + T (n_open - 1) through the open-iris block
    if len(T) and np.isfinite(cols["n_d"][0]):
        n_open = cols["n_d"][0]
        out.append(
            f'<line class="reference" x1="{px(0):.2f}" y1="{py(1.0):.2f}" x2="{px(1):.2f}" '
            f'y2="{py(n_open):.2f}" stroke="{COLORS["ref"]}" stroke-dasharray="6 4"/>'
        )

    for k in range(len(T)):
        attrs = " ".join(
            f"data-{name}={quoteattr(_cell(series, name, k))}" for name in BLOCK_COLUMNS
        )
        out.append(f'<g class="row" {attrs}>')
        for c, vals in cols.items():
            v = vals[k]
            if not (np.isfinite(v) and np.isfinite(T[k])):
                continue
            color = COLORS[c]
            fill = color if valid[k] else "none"
            x, y = px(T[k]), py(v)
            e = err[c] * ph / (yhi - ylo)
            out.append(f'<line x1="{x:.2f}" y1="{y - e:.2f}" x2="{x:.2f}" y2="{y + e:.2f}" '
                       f'stroke="{color}"/>')
            out.append(f'<circle class="{c}" cx="{x:.2f}" cy="{y:.2f}" r="3" '
                       f'stroke="{color}" fill="{fill}"/>')
        out.append("</g>")

    lx = LEFT + 12
    for j, (label, color) in enumerate((("n_d", COLORS["n_d"]), ("n_corr", COLORS["n_corr"]),
                                        ("single-mode line", COLORS["ref"]))):
        yy = TOP + 16 + 16 * j
        out.append(f'<circle cx="{lx}" cy="{yy - 4}" r="3" fill="{color}"/>')
        out.append(f'<text x="{lx + 10}" y="{yy}">{label}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def _cell(series, name, k) -> str:
    v = getattr(series, name)[k]
    if name in ("block", "valid"):
        return str(int(v))
    return _fmt(v)

