"""Minimal standalone SVG line charts (no plotting dependency)."""
from __future__ import annotations

from xml.sax.saxutils import escape

COLORS = ("#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b")


def _fmt(v: float) -> str:
    return f"{v:.2f}"


def line_chart(series: dict[str, tuple[list, list]], title: str = "", width: int = 900,
               height: int = 320, x_label: str = "", y_label: str = "") -> str:
    """Render each ``label -> (xs, ys)`` entry as one polyline."""
    pad_l, pad_r, pad_t, pad_b = 60, 20, 30, 40
    xs_all = [x for xs, _ in series.values() for x in xs]
    ys_all = [y for _, ys in series.values() for y in ys]
    if not xs_all:
        raise ValueError("nothing to plot")
    x0, x1 = min(xs_all), max(xs_all)
    y0, y1 = min(ys_all), max(ys_all)
    if x1 == x0:
        x1 = x0 + 1
    if y1 == y0:
        y1 = y0 + 1
    pw, ph = width - pad_l - pad_r, height - pad_t - pad_b

    def sx(x):
        return pad_l + (x - x0) / (x1 - x0) * pw

    def sy(y):
        return pad_t + (1 - (y - y0) / (y1 - y0)) * ph

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}">',
        f'<rect x="0" y="0" width="{width}" height="{height}" fill="white"/>',
        f'<text x="{width / 2}" y="18" text-anchor="middle" font-size="14">{escape(title)}</text>',
        f'<line x1="{pad_l}" y1="{pad_t + ph}" x2="{pad_l + pw}" y2="{pad_t + ph}" stroke="black"/>',
        f'<line x1="{pad_l}" y1="{pad_t}" x2="{pad_l}" y2="{pad_t + ph}" stroke="black"/>',
    ]
    for k in range(5):
        yv = y0 + (y1 - y0) * k / 4
        out.append(f'<text x="{pad_l - 6}" y="{_fmt(sy(yv) + 4)}" text-anchor="end" '
                   f'font-size="10">{yv:.1f}</text>')
        xv = x0 + (x1 - x0) * k / 4
        out.append(f'<text x="{_fmt(sx(xv))}" y="{pad_t + ph + 14}" text-anchor="middle" '
                   f'font-size="10">{xv:.0f}</text>')
    if x_label:
        out.append(f'<text x="{pad_l + pw / 2}" y="{height - 6}" text-anchor="middle" '
                   f'font-size="11">{escape(x_label)}</text>')
    if y_label:
        out.append(f'<text x="14" y="{pad_t + ph / 2}" text-anchor="middle" font-size="11" '
                   f'transform="rotate(-90 14 {pad_t + ph / 2})">{escape(y_label)}</text>')
    for i, (label, (xs, ys)) in enumerate(series.items()):
        color = COLORS[i % len(COLORS)]
        pts = " ".join(f"{_fmt(sx(x))},{_fmt(sy(y))}" for x, y in zip(xs, ys))
        raw_x = " ".join(repr(float(x)) for x in xs)
        raw_y = " ".join(repr(float(y)) for y in ys)
        out.append(f'<polyline fill="none" stroke="{color}" stroke-width="1.5" '
                   f'data-label="{escape(label)}" data-x="{raw_x}" data-y="{raw_y}" '
                   f'points="{pts}"/>')
        out.append(f'<text x="{pad_l + 10 + 110 * i}" y="{pad_t + 12}" fill="{color}" '
                   f'font-size="11">{escape(label)}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"
