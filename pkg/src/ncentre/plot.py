"""Static SVG drawings of orbits, centres and the interaction circle."""

from __future__ import annotations

import numpy as np


def _fmt(x: float) -> str:
    return f"{x:.6g}"


def orbit_svg(
    curves,
    centres,
    *,
    radius: float,
    section_radius: float | None = None,
    size: int = 640,
    margin: float = 0.08,
    zoom: float | None = None,
) -> str:
    """SVG text showing ``curves`` (each an ``(n, 2)`` array), the centres and dashed circles.

    ``zoom`` (a half-width in model units) restricts the view to a box around
    the origin; by default the view fits every curve and circle.
    """
    curves = [np.asarray(c, float) for c in curves]
    centres = np.asarray(centres, float).reshape(-1, 2)
    radii = [radius] + ([section_radius] if section_radius and section_radius != radius else [])
    if zoom is None:
        extent = max([max(radii)] + [float(np.max(np.abs(c))) for c in curves if c.size])
    else:
        extent = zoom
    half = extent * (1.0 + margin)
    scale = size / (2.0 * half)

    def px(p):
        return (p[..., 0] + half) * scale, (half - p[..., 1]) * scale

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{size}" height="{size}" viewBox="0 0 {size} {size}">',
        f'<rect width="{size}" height="{size}" fill="white"/>',
    ]
    cx, cy = px(np.zeros(2))
    for r in radii:
        out.append(
            f'<circle cx="{_fmt(cx)}" cy="{_fmt(cy)}" r="{_fmt(r * scale)}" fill="none" '
            f'stroke="#888" stroke-dasharray="6 4" stroke-width="1"/>'
        )
    colours = ["#1f4e9c", "#b03a2e", "#1e8449", "#7d3c98"]
    for k, c in enumerate(curves):
        if c.shape[0] < 2:
            continue
        x, y = px(c)
        pts = " ".join(f"{_fmt(a)},{_fmt(b)}" for a, b in zip(x, y))
        out.append(f'<polyline points="{pts}" fill="none" stroke="{colours[k % len(colours)]}" stroke-width="1.2"/>')
    x, y = px(centres)
    dot = max(2.0, 0.004 * size)
    for a, b in zip(x, y):
        out.append(f'<circle cx="{_fmt(a)}" cy="{_fmt(b)}" r="{_fmt(dot)}" fill="black"/>')
    out.append("</svg>")
    return "\n".join(out) + "\n"
