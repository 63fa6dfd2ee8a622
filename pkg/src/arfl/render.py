"""Hand-written SVG for decision-boundary figures (probability heat map plus samples)."""

from __future__ import annotations

import numpy as np

from arfl.evaluation import BoundaryGrid


def _color(p: float) -> str:
    # blue (p = 0) through white to red (p = 1)
    p = min(max(p, 0.0), 1.0)
    if p < 0.5:
        t = p / 0.5
        r, g, b = int(60 + 195 * t), int(90 + 165 * t), 255
    else:
        t = (p - 0.5) / 0.5
        r, g, b = 255, int(255 - 175 * t), int(255 - 195 * t)
    return f"#{r:02x}{g:02x}{b:02x}"


def boundary_svg(grid: BoundaryGrid, points=None, labels=None, size: int = 480, max_cells: int = 80) -> str:
    xmin, xmax = float(grid.xs[0]), float(grid.xs[-1])
    ymin, ymax = float(grid.ys[0]), float(grid.ys[-1])
    height = int(round(size * (ymax - ymin) / (xmax - xmin)))

    def px(x):
        return (x - xmin) / (xmax - xmin) * size

    def py(y):
        return height - (y - ymin) / (ymax - ymin) * height

    ny, nx = grid.probs.shape
    sx = max(1, -(-nx // max_cells))
    sy = max(1, -(-ny // max_cells))
    cw = size / (nx / sx)
    ch = height / (ny / sy)
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{size}" height="{height}" viewBox="0 0 {size} {height}">',
        '<g shape-rendering="crispEdges">',
    ]
    for i in range(0, ny, sy):
        for j in range(0, nx, sx):
            p = float(grid.probs[i : i + sy, j : j + sx].mean())
            x0 = j / sx * cw
            y0 = height - (i / sy + 1) * ch
            parts.append(f'<rect x="{x0:.2f}" y="{y0:.2f}" width="{cw + 0.5:.2f}" height="{ch + 0.5:.2f}" fill="{_color(p)}"/>')
    parts.append("</g>")
    if points is not None:
        for (x, y), lab in zip(np.asarray(points), np.asarray(labels)):
            fill = "#b2182b" if lab == 1 else "#2166ac"
            parts.append(f'<circle cx="{px(x):.2f}" cy="{py(y):.2f}" r="4" fill="{fill}" stroke="black" stroke-width="0.8"/>')
    parts.append("</svg>")
    return "\n".join(parts) + "\n"
