"""Minimal SVG writer for barycentric (ternary) plots of the 2-simplex."""

from __future__ import annotations

import math
from xml.sax.saxutils import escape

import numpy as np

WIDTH, HEIGHT = 800, 700
# vertex positions of e1, e2, e3
CORNERS = np.array([
    [100.0, 620.0],
    [700.0, 620.0],
    [400.0, 620.0 - 600.0 * math.sqrt(3) / 2],
])

RED = "#d62728"
BLUE = "#1f77b4"
HULL = "#2ca02c"
TRAJ = "#333333"


def project(x) -> np.ndarray:
    """Barycentric coordinates (rows) to canvas points."""
    x = np.atleast_2d(np.asarray(x, dtype=float))
    return x @ CORNERS


def unproject(points) -> np.ndarray:
    p = np.atleast_2d(np.asarray(points, dtype=float))
    M = np.vstack([CORNERS.T, np.ones(3)])
    rhs = np.vstack([p.T, np.ones(p.shape[0])])
    return np.linalg.solve(M, rhs).T


def _fmt(v: float) -> str:
    return f"{v:.2f}".rstrip("0").rstrip(".")


def _points_attr(pts) -> str:
    return " ".join(f"{_fmt(a)},{_fmt(b)}" for a, b in pts)


def convex_polygon_order(vertices) -> np.ndarray:
    """Sort simplex points counter-clockwise on the canvas."""
    v = np.asarray(vertices, dtype=float)
    if len(v) < 3:
        return v
    p = project(v)
    c = p.mean(axis=0)
    ang = np.arctan2(p[:, 1] - c[1], p[:, 0] - c[0])
    return v[np.argsort(ang, kind="stable")]


class TernaryCanvas:
    """Collects layered SVG elements; ``layers`` keeps insertion order."""

    def __init__(self, title: str = ""):
        self.title = title
        self.layers: dict[str, list[str]] = {}
        self.legend: list[tuple[str, str]] = []

    def _add(self, layer: str, element: str) -> None:
        self.layers.setdefault(layer, []).append(element)

    def frame(self) -> None:
        self._add("frame", f'<polygon points="{_points_attr(CORNERS)}" '
                           'fill="none" stroke="black" stroke-width="1.5"/>')
        offsets = [(-30, 20), (15, 20), (-10, -12)]
        for k, ((px, py), (dx, dy)) in enumerate(zip(CORNERS, offsets)):
            self._add("frame", f'<text x="{_fmt(px + dx)}" y="{_fmt(py + dy)}" '
                               f'font-size="18">e{k + 1}</text>')

    def raster(self, layer: str, mask_fn, resolution: int, color: str,
               opacity: float = 0.45) -> None:
        """Fill cells whose centre satisfies ``mask_fn`` (stacked barycentric rows).

        Consecutive hits in a pixel row merge into one rectangle.
        """
        x0, x1 = CORNERS[:, 0].min(), CORNERS[:, 0].max()
        y0, y1 = CORNERS[:, 1].min(), CORNERS[:, 1].max()
        w = (x1 - x0) / resolution
        h = (y1 - y0) / resolution
        xs = x0 + (np.arange(resolution) + 0.5) * w
        for r in range(resolution):
            yc = y0 + (r + 0.5) * h
            bary = unproject(np.column_stack([xs, np.full(resolution, yc)]))
            inside = np.all(bary >= -1e-12, axis=1)
            hit = np.zeros(resolution, dtype=bool)
            if inside.any():
                hit[inside] = mask_fn(bary[inside])
            start = None
            for c in range(resolution + 1):
                on = c < resolution and hit[c]
                if on and start is None:
                    start = c
                elif not on and start is not None:
                    self._add(layer, f'<rect x="{_fmt(x0 + start * w)}" y="{_fmt(yc - h / 2)}" '
                                     f'width="{_fmt((c - start) * w)}" height="{_fmt(h)}" '
                                     f'fill="{color}" fill-opacity="{opacity}" stroke="none"/>')
                    start = None

    def polygon(self, layer: str, vertices, stroke: str, fill: str = "none",
                width: float = 1.5, dash: str | None = None) -> None:
        v = convex_polygon_order(vertices)
        pts = project(v)
        extra = f' stroke-dasharray="{dash}"' if dash else ""
        if len(pts) == 1:
            self.marker(layer, v[0], stroke, 4)
            return
        self._add(layer, f'<polygon points="{_points_attr(pts)}" fill="{fill}" '
                         f'stroke="{stroke}" stroke-width="{width}"{extra}/>')

    def polyline(self, layer: str, states, color: str = TRAJ, width: float = 1.2) -> None:
        pts = project(states)
        self._add(layer, f'<polyline points="{_points_attr(pts)}" fill="none" '
                         f'stroke="{color}" stroke-width="{width}"/>')

    def marker(self, layer: str, x, color: str, radius: float = 4.0) -> None:
        (px, py), = project(x)
        self._add(layer, f'<circle cx="{_fmt(px)}" cy="{_fmt(py)}" r="{_fmt(radius)}" '
                         f'fill="{color}"/>')

    def arrows(self, layer: str, points, vectors, max_len: float = 18.0) -> None:
        p = project(points)
        v = np.atleast_2d(vectors) @ CORNERS
        norms = np.linalg.norm(v, axis=1)
        top = norms.max() if norms.size and norms.max() > 0 else 1.0
        for (px, py), (vx, vy), nv in zip(p, v, norms):
            if nv <= 1e-12 * top:
                continue
            s = max_len * math.sqrt(nv / top) / nv
            self._add(layer, f'<line x1="{_fmt(px)}" y1="{_fmt(py)}" '
                             f'x2="{_fmt(px + s * vx)}" y2="{_fmt(py + s * vy)}" '
                             'stroke="#7f7f7f" stroke-width="1" marker-end="url(#arrow)"/>')

    def add_legend(self, label: str, color: str) -> None:
        self.legend.append((label, color))

    def render(self) -> str:
        out = [
            '<?xml version="1.0" encoding="UTF-8"?>',
            f'<svg xmlns="http://www.w3.org/2000/svg" viewBox="0 0 {WIDTH} {HEIGHT}" '
            f'width="{WIDTH}" height="{HEIGHT}">',
            '<defs><marker id="arrow" viewBox="0 0 10 10" refX="9" refY="5" '
            'markerWidth="5" markerHeight="5" orient="auto-start-reverse">'
            '<path d="M 0 0 L 10 5 L 0 10 z" fill="#7f7f7f"/></marker></defs>',
            '<rect width="100%" height="100%" fill="white"/>',
        ]
        if self.title:
            out.append(f'<text x="400" y="40" font-size="20" text-anchor="middle">'
                       f'{escape(self.title)}</text>')
        for name, elements in self.layers.items():
            out.append(f'<g id="{name}">')
            out.extend(elements)
            out.append("</g>")
        out.append('<g id="legend">')
        for k, (label, color) in enumerate(self.legend):
            y = 70 + 24 * k
            out.append(f'<rect x="560" y="{y}" width="16" height="16" fill="{color}"/>')
            out.append(f'<text x="584" y="{y + 13}" font-size="14">{escape(label)}</text>')
        out.append("</g>")
        out.append("</svg>")
        return "\n".join(out) + "\n"
