"""Minimal self-contained SVG scatter-matrix writer (no plotting dependency)."""

from __future__ import annotations

import numpy as np

_PANEL = 180
_PAD = 14
_MARGIN = 40


def _panel_points(x, y, x0, y0, xmin, xmax, ymin, ymax, fmt):
    xs = x0 + (x - xmin) / (xmax - xmin) * _PANEL
    ys = y0 + _PANEL - (y - ymin) / (ymax - ymin) * _PANEL
    return [(fmt(px), fmt(py)) for px, py in zip(xs, ys)]


def scatter_matrix_svg(
    samples: np.ndarray,
    columns: list[str],
    overlay: np.ndarray | None = None,
) -> str:
    """Render a d x d scatter matrix as an SVG string.

    ``overlay`` points (measured data) are drawn first in grey dots, samples
    on top as small crosses; the diagonal carries the column names.  Output is
    deterministic: fixed float formatting, no timestamps.
    """
    samples = np.asarray(samples, dtype=float)
    d = samples.shape[1]
    if len(columns) != d:
        raise ValueError("need one column name per dimension")
    if overlay is not None:
        overlay = np.asarray(overlay, dtype=float)
        if overlay.shape[1] != d:
            raise ValueError("overlay dimension mismatch")

    def fmt(v):
        return f"{v:.2f}"

    size = _MARGIN * 2 + d * _PANEL + (d - 1) * _PAD
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{size}" height="{size}" '
        f'viewBox="0 0 {size} {size}">',
        '<rect width="100%" height="100%" fill="white"/>',
    ]
    both = samples if overlay is None else np.vstack([samples, overlay])
    mins = both.min(axis=0)
    maxs = both.max(axis=0)
    spans = np.where(maxs > mins, maxs - mins, 1.0)
    maxs = mins + spans

    for i in range(d):          # row: y variable
        for j in range(d):      # col: x variable
            x0 = _MARGIN + j * (_PANEL + _PAD)
            y0 = _MARGIN + i * (_PANEL + _PAD)
            parts.append(
                f'<rect x="{x0}" y="{y0}" width="{_PANEL}" height="{_PANEL}" '
                'fill="none" stroke="black" stroke-width="1"/>'
            )
            if i == j:
                parts.append(
                    f'<text x="{x0 + _PANEL / 2:.1f}" y="{y0 + _PANEL / 2:.1f}" '
                    'text-anchor="middle" dominant-baseline="middle" '
                    f'font-family="sans-serif" font-size="14">{columns[i]}</text>'
                )
                continue
            if overlay is not None:
                pts = _panel_points(
                    overlay[:, j], overlay[:, i], x0, y0,
                    mins[j], maxs[j], mins[i], maxs[i], fmt,
                )
                parts.append('<g fill="#bbbbbb">')
                parts.extend(f'<circle cx="{px}" cy="{py}" r="1"/>' for px, py in pts)
                parts.append("</g>")
            pts = _panel_points(
                samples[:, j], samples[:, i], x0, y0,
                mins[j], maxs[j], mins[i], maxs[i], fmt,
            )
            parts.append('<g stroke="black" stroke-width="0.6">')
            for px, py in pts:
                fx, fy = float(px), float(py)
                parts.append(
                    f'<path d="M {fx - 1.5:.2f} {fy:.2f} H {fx + 1.5:.2f} '
                    f'M {fx:.2f} {fy - 1.5:.2f} V {fy + 1.5:.2f}"/>'
                )
            parts.append("</g>")
    parts.append("</svg>")
    return "\n".join(parts) + "\n"
