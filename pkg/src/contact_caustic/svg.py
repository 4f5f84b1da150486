"""Minimal SVG rendering of caustic slices."""

from __future__ import annotations

from typing import Sequence

import numpy as np

from .caustic import CausticSlice

SIZE = 480
MARGIN = 30


def _frame(points: np.ndarray):
    lo = points.min(axis=0)
    hi = points.max(axis=0)
    span = float(max(hi - lo)) or 1.0
    centre = (lo + hi) / 2
    scale = (SIZE - 2 * MARGIN) / span

    def to_px(p):
        u = SIZE / 2 + (p[..., 0] - centre[0]) * scale
        v = SIZE / 2 - (p[..., 1] - centre[1]) * scale
        return np.stack([u, v], axis=-1)

    return to_px


def slice_svg(slices: Sequence[CausticSlice], title: str = "") -> str:
    """Polyline of each slice, cusps as filled triangles, crossings circled.

    Coordinates are rescaled by ``h^4`` so both sides share one frame.
    """
    colours = {1: "#1f5fa8", -1: "#b8432f"}
    curves = [(sl, sl.xy / sl.h ** 4) for sl in slices]
    to_px = _frame(np.concatenate([c for _, c in curves]))
    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{SIZE}" height="{SIZE}" '
           f'viewBox="0 0 {SIZE} {SIZE}">',
           f'<rect width="{SIZE}" height="{SIZE}" fill="white"/>']
    if title:
        out.append(f'<text x="{MARGIN}" y="20" font-family="sans-serif" font-size="13">'
                   f'{title}</text>')
    for sl, xy in curves:
        colour = colours[sl.side]
        px = to_px(np.vstack([xy, xy[:1]]))
        pts = " ".join(f"{u:.2f},{v:.2f}" for u, v in px)
        out.append(f'<polyline points="{pts}" fill="none" stroke="{colour}" '
                   f'stroke-width="0.8"/>')
        n = sl.n_grid
        for a in sl.cusp_angles:
            t = a / sl.step
            i = int(np.floor(t)) % n
            frac = t - np.floor(t)
            p = (1 - frac) * xy[i] + frac * xy[(i + 1) % n]
            u, v = to_px(p)
            out.append(f'<path d="M {u:.2f} {v - 5:.2f} L {u - 4.5:.2f} {v + 3.5:.2f} '
                       f'L {u + 4.5:.2f} {v + 3.5:.2f} Z" fill="{colour}"/>')
        for c in sl.crossings:
            u, v = to_px(np.asarray(c.point) / sl.h ** 4)
            out.append(f'<circle cx="{u:.2f}" cy="{v:.2f}" r="6" fill="none" '
                       f'stroke="black" stroke-width="1"/>')
    out.append("</svg>")
    return "\n".join(out) + "\n"
