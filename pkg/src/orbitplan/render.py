"""Minimal SVG output: quality-field heatmaps and orbit polylines."""

from __future__ import annotations

from typing import Sequence
from xml.sax.saxutils import escape

import numpy as np

_PALETTE = np.array([  # dark blue -> teal -> yellow
    [13, 8, 135], [84, 2, 163], [139, 10, 165], [185, 50, 137], [219, 92, 104],
    [244, 136, 73], [254, 188, 43], [240, 249, 33],
], dtype=float)
_TRACE_COLORS = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b",
                 "#e377c2", "#17becf")


def _color(u: float) -> str:
    u = min(max(u, 0.0), 1.0) * (len(_PALETTE) - 1)
    lo = int(np.floor(u))
    hi = min(lo + 1, len(_PALETTE) - 1)
    rgb = _PALETTE[lo] + (u - lo) * (_PALETTE[hi] - _PALETTE[lo])
    return "#{:02x}{:02x}{:02x}".format(*(int(round(c)) for c in rgb))


def heatmap_svg(values: np.ndarray, extent_km: float, r_earth: float,
                markers: Sequence[tuple[float, float]] = (), title: str = "",
                size_px: int = 480) -> str:
    """Heatmap of a (ny, nx) field over the square [-extent, extent]^2 km.

    NaN cells (inside the Earth) are left blank; the Earth disk is drawn on top.
    Row 0 of ``values`` is the most negative y.
    """
    v = np.asarray(values, dtype=float)
    ny, nx = v.shape
    finite = v[np.isfinite(v)]
    vmax = float(finite.max()) if finite.size and finite.max() > 0 else 1.0
    cw, ch = size_px / nx, size_px / ny
    scale = size_px / (2.0 * extent_km)
    pad = 30
    parts = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{size_px + 2 * pad}" '
             f'height="{size_px + 2 * pad + 20}" viewBox="0 0 {size_px + 2 * pad} '
             f'{size_px + 2 * pad + 20}">',
             f'<rect width="100%" height="100%" fill="white"/>',
             f'<text x="{pad}" y="20" font-family="sans-serif" font-size="14">{escape(title)}</text>',
             f'<g transform="translate({pad},{pad + 10})">']
    for r in range(ny):
        y = (ny - 1 - r) * ch  # SVG y grows downward
        for c in range(nx):
            val = v[r, c]
            if not np.isfinite(val):
                continue
            parts.append(f'<rect x="{c * cw:.2f}" y="{y:.2f}" width="{cw + 0.05:.2f}" '
                         f'height="{ch + 0.05:.2f}" fill="{_color(val / vmax)}"/>')
    cx = cy = size_px / 2.0
    parts.append(f'<circle cx="{cx}" cy="{cy}" r="{r_earth * scale:.2f}" fill="#3a3a3a"/>')
    for mx, my in markers:
        parts.append(f'<circle cx="{cx + mx * scale:.2f}" cy="{cy - my * scale:.2f}" r="4" '
                     f'fill="white" stroke="black"/>')
    parts.append(f'<rect width="{size_px}" height="{size_px}" fill="none" stroke="black"/>')
    parts.append("</g>")
    parts.append(f'<text x="{pad}" y="{size_px + 2 * pad + 12}" font-family="sans-serif" '
                 f'font-size="12">extent ±{extent_km:g} km, max {vmax:.4g}</text>')
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def trajectories_svg(tracks: Sequence[tuple[str, np.ndarray]], r_earth: float,
                     title: str = "", size_px: int = 480) -> str:
    """x-y projection of several (N, 3) position tracks with the Earth disk."""
    extent = max([float(np.abs(p[:, :2]).max()) for _, p in tracks] + [r_earth]) * 1.1
    scale = size_px / (2.0 * extent)
    pad = 30
    cx = cy = size_px / 2.0
    height = size_px + 2 * pad + 20 + 16 * len(tracks)
    parts = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{size_px + 2 * pad}" '
             f'height="{height}" viewBox="0 0 {size_px + 2 * pad} {height}">',
             '<rect width="100%" height="100%" fill="white"/>',
             f'<text x="{pad}" y="20" font-family="sans-serif" font-size="14">{escape(title)}</text>',
             f'<g transform="translate({pad},{pad + 10})">',
             f'<circle cx="{cx}" cy="{cy}" r="{r_earth * scale:.2f}" fill="#9bbcd8"/>']
    for idx, (name, pos) in enumerate(tracks):
        color = _TRACE_COLORS[idx % len(_TRACE_COLORS)]
        pts = " ".join(f"{cx + x * scale:.2f},{cy - y * scale:.2f}" for x, y in pos[:, :2])
        parts.append(f'<polyline points="{pts}" fill="none" stroke="{color}" stroke-width="1.2"/>')
        x0, y0 = pos[0, :2]
        parts.append(f'<circle cx="{cx + x0 * scale:.2f}" cy="{cy - y0 * scale:.2f}" r="3" '
                     f'fill="{color}"/>')
    parts.append(f'<rect width="{size_px}" height="{size_px}" fill="none" stroke="black"/>')
    parts.append("</g>")
    for idx, (name, _) in enumerate(tracks):
        y = size_px + 2 * pad + 12 + 16 * idx
        color = _TRACE_COLORS[idx % len(_TRACE_COLORS)]
        parts.append(f'<rect x="{pad}" y="{y - 9}" width="10" height="10" fill="{color}"/>')
        parts.append(f'<text x="{pad + 16}" y="{y}" font-family="sans-serif" '
                     f'font-size="12">{escape(name)}</text>')
    parts.append("</svg>")
    return "\n".join(parts) + "\n"
