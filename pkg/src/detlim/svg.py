"""Minimal SVG line plots for sensitivity sweeps.

Hand-rolled so the output stays small and deterministic: exactly one
polyline per curve, log-log axes with decade ticks, and a legend.
"""

from __future__ import annotations

import math

WIDTH, HEIGHT = 720, 540
MARGIN_L, MARGIN_R, MARGIN_T, MARGIN_B = 80, 24, 44, 60


def _decades(lo: float, hi: float) -> list[int]:
    first = math.ceil(math.log10(lo) - 1e-9)
    last = math.floor(math.log10(hi) + 1e-9)
    return list(range(first, last + 1))


def write_log_plot(path, omega, series, title: str = "", x_label: str = "omega",
                   y_label: str = "") -> None:
    """Write a log-log plot; series is a list of (label, color, values)."""
    omega = list(omega)
    if not omega or not series:
        raise ValueError("nothing to plot")
    positive = [v for _, _, values in series for v in values if v > 0]
    if not positive:
        raise ValueError("nothing positive to plot on a log axis")
    vmin, vmax = min(positive), max(positive)
    clamp = vmin / 10.0

    x0, x1 = math.log10(omega[0]), math.log10(omega[-1])
    y0, y1 = math.log10(clamp), math.log10(vmax)
    pad = 0.04 * (y1 - y0) or 1.0
    y0 -= pad
    y1 += pad
    plot_w = WIDTH - MARGIN_L - MARGIN_R
    plot_h = HEIGHT - MARGIN_T - MARGIN_B

    def px(x: float) -> float:
        return MARGIN_L + (x - x0) / (x1 - x0) * plot_w

    def py(y: float) -> float:
        return HEIGHT - MARGIN_B - (y - y0) / (y1 - y0) * plot_h

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" '
        f'viewBox="0 0 {WIDTH} {HEIGHT}">',
        f'<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>',
        f'<text x="{WIDTH / 2:.0f}" y="24" text-anchor="middle" font-size="16">{title}</text>',
    ]
    # frame
    parts.append(
        f'<rect x="{MARGIN_L}" y="{MARGIN_T}" width="{plot_w}" height="{plot_h}" '
        f'fill="none" stroke="black"/>'
    )
    for d in _decades(10.0 ** x0, 10.0 ** x1):
        x = px(d)
        parts.append(f'<line x1="{x:.2f}" y1="{HEIGHT - MARGIN_B}" x2="{x:.2f}" '
                     f'y2="{HEIGHT - MARGIN_B + 6}" stroke="black"/>')
        parts.append(f'<text x="{x:.2f}" y="{HEIGHT - MARGIN_B + 22}" '
                     f'text-anchor="middle" font-size="12">1e{d}</text>')
    for d in _decades(10.0 ** y0, 10.0 ** y1):
        y = py(d)
        parts.append(f'<line x1="{MARGIN_L - 6}" y1="{y:.2f}" x2="{MARGIN_L}" '
                     f'y2="{y:.2f}" stroke="black"/>')
        parts.append(f'<text x="{MARGIN_L - 10}" y="{y + 4:.2f}" '
                     f'text-anchor="end" font-size="12">1e{d}</text>')
    parts.append(f'<text x="{WIDTH / 2:.0f}" y="{HEIGHT - 14}" text-anchor="middle" '
                 f'font-size="13">{x_label}</text>')
    parts.append(f'<text x="20" y="{HEIGHT / 2:.0f}" text-anchor="middle" font-size="13" '
                 f'transform="rotate(-90 20 {HEIGHT / 2:.0f})">{y_label}</text>')

    for label, color, values in series:
        pts = []
        for w, v in zip(omega, values):
            y = math.log10(v) if v > 0 else math.log10(clamp)
            pts.append(f"{px(math.log10(w)):.2f},{py(max(y, y0)):.2f}")
        parts.append(f'<polyline fill="none" stroke="{color}" stroke-width="1.5" '
                     f'points="{" ".join(pts)}"/>')

    for i, (label, color, _values) in enumerate(series):
        y = MARGIN_T + 16 + 18 * i
        x = WIDTH - MARGIN_R - 130
        parts.append(f'<line x1="{x}" y1="{y - 4}" x2="{x + 24}" y2="{y - 4}" '
                     f'stroke="{color}" stroke-width="2"/>')
        parts.append(f'<text x="{x + 30}" y="{y}" font-size="12">{label}</text>')

    parts.append("</svg>")
    with open(path, "w", newline="\n") as fh:
        fh.write("\n".join(parts) + "\n")
