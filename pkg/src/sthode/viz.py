"""Tiny deterministic SVG writers for line and bar charts."""

from __future__ import annotations


def _fmt(v: float) -> str:
    return f"{v:.3f}"


def _scale(vals, lo, hi, out_lo, out_hi):
    span = hi - lo or 1.0
    return [out_lo + (v - lo) / span * (out_hi - out_lo) for v in vals]


def line_chart(series: dict, title: str = "", width: int = 800, height: int = 300,
               comment: str = "") -> str:
    """series: name -> list of y values (shared x = index)."""
    all_y = [v for ys in series.values() for v in ys]
    lo, hi = (min(all_y), max(all_y)) if all_y else (0.0, 1.0)
    if lo == hi:
        lo, hi = lo - 1.0, hi + 1.0
    colors = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"]
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}">',
    ]
    if comment:
        parts.append(f"<!-- {comment} -->")
    parts.append(f'<text x="10" y="16" font-size="13">{title}</text>')
    parts.append(f'<rect x="0" y="0" width="{width}" height="{height}" fill="none" stroke="#999"/>')
    for i, (name, ys) in enumerate(series.items()):
        if not ys:
            continue
        xs = _scale(range(len(ys)), 0, max(len(ys) - 1, 1), 45, width - 10)
        sy = _scale(ys, lo, hi, height - 25, 25)
        pts = " ".join(f"{_fmt(x)},{_fmt(y)}" for x, y in zip(xs, sy))
        color = colors[i % len(colors)]
        parts.append(f'<polyline points="{pts}" fill="none" stroke="{color}" stroke-width="1.5"/>')
        parts.append(f'<text x="50" y="{32 + 14 * i}" font-size="11" fill="{color}">{name}</text>')
    parts.append(f'<text x="5" y="{height - 8}" font-size="10">{_fmt(lo)}</text>')
    parts.append(f'<text x="5" y="36" font-size="10">{_fmt(hi)}</text>')
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def bar_chart(labels, values, title: str = "", width: int = 640, height: int = 320,
              comment: str = "") -> str:
    hi = max(values) if values else 1.0
    hi = hi or 1.0
    parts = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}">']
    if comment:
        parts.append(f"<!-- {comment} -->")
    parts.append(f'<text x="10" y="16" font-size="13">{title}</text>')
    n = max(len(values), 1)
    bw = (width - 60) / n
    for i, (lab, v) in enumerate(zip(labels, values)):
        h = (v / hi) * (height - 80)
        x = 40 + i * bw
        y = height - 40 - h
        parts.append(
            f'<rect x="{_fmt(x + 4)}" y="{_fmt(y)}" width="{_fmt(bw - 8)}" '
            f'height="{_fmt(h)}" fill="#1f77b4"/>'
        )
        parts.append(f'<text x="{_fmt(x + bw / 2)}" y="{height - 24}" font-size="10" '
                     f'text-anchor="middle">{lab}</text>')
        parts.append(f'<text x="{_fmt(x + bw / 2)}" y="{_fmt(y - 4)}" font-size="10" '
                     f'text-anchor="middle">{v:.4g}</text>')
    parts.append("</svg>")
    return "\n".join(parts) + "\n"
