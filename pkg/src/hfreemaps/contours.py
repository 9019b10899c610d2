"""Level-set extraction by marching squares, with SVG output.

Contours are emitted as polylines (merged from per-cell segments) at
equally spaced levels strictly between the grid minimum and maximum.
The SVG output is deterministic for fixed inputs: no timestamps, fixed
float formatting, and stable polyline ordering.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .expr import Chart, Expr, eval_value_many
from .errors import DomainError
from .transversal import Window

__all__ = ["LevelRender", "marching_squares", "render_levels", "contour_svg"]


def _interp(p0, p1, v0, v1, level):
    t = 0.0 if v1 == v0 else (level - v0) / (v1 - v0)
    t = min(1.0, max(0.0, t))
    return (p0[0] + t * (p1[0] - p0[0]), p0[1] + t * (p1[1] - p0[1]))


def _cell_segments(x0, x1, y0, y1, v00, v10, v01, v11, level):
    """Segments of one cell; corner values v[xy] with x fastest."""
    corners = ((x0, y0), (x1, y0), (x1, y1), (x0, y1))
    values = (v00, v10, v11, v01)
    code = sum(1 << i for i, v in enumerate(values) if v > level)
    if code in (0, 15):
        return []
    edges = {
        0: _interp(corners[0], corners[1], values[0], values[1], level),
        1: _interp(corners[1], corners[2], values[1], values[2], level),
        2: _interp(corners[3], corners[2], values[3], values[2], level),
        3: _interp(corners[0], corners[3], values[0], values[3], level),
    }
    table = {
        1: [(3, 0)], 2: [(0, 1)], 3: [(3, 1)], 4: [(1, 2)],
        6: [(0, 2)], 7: [(3, 2)], 8: [(2, 3)], 9: [(0, 2)],
        11: [(1, 2)], 12: [(1, 3)], 13: [(0, 1)], 14: [(3, 0)],
    }
    if code in (5, 10):
        # saddle: disambiguate with the cell-centre average
        centre_above = (values[0] + values[1] + values[2] + values[3]) / 4.0 > level
        if code == 5:
            pairs = [(3, 0), (1, 2)] if centre_above else [(3, 2), (1, 0)]
        else:
            pairs = [(0, 1), (2, 3)] if centre_above else [(0, 3), (2, 1)]
    else:
        pairs = table[code]
    out = []
    for a, b in pairs:
        seg = (edges[a], edges[b])
        if seg[0] != seg[1]:
            out.append(seg)
    return out


def _merge_segments(segments):
    """Chain shared endpoints into polylines; deterministic ordering."""
    if not segments:
        return []

    def key(pt):
        return (round(pt[0], 9), round(pt[1], 9))

    adjacency: dict = {}
    for idx, (a, b) in enumerate(segments):
        adjacency.setdefault(key(a), []).append((idx, False))
        adjacency.setdefault(key(b), []).append((idx, True))

    used = [False] * len(segments)

    def walk(idx, reverse):
        a, b = segments[idx]
        used[idx] = True
        path = [a, b] if not reverse else [b, a]
        while True:
            links = [entry for entry in adjacency.get(key(path[-1]), ())
                     if not used[entry[0]]]
            if not links:
                return path
            nxt, at_end = links[0]
            used[nxt] = True
            a, b = segments[nxt]
            path.append(a if at_end else b)

    polylines = []
    endpoints = sorted(
        (pt for pt, entries in adjacency.items() if len(entries) == 1))
    for pt in endpoints:
        for idx, at_end in adjacency[pt]:
            if not used[idx]:
                polylines.append(walk(idx, at_end))
    for idx in range(len(segments)):  # remaining closed loops
        if not used[idx]:
            polylines.append(walk(idx, False))
    return [np.array(p) for p in polylines]


def marching_squares(xs: np.ndarray, ys: np.ndarray, values: np.ndarray,
                     level: float):
    """Polylines of ``values == level``; NaN cells are skipped and their
    indices returned separately."""
    ny, nx = values.shape
    segments = []
    skipped = []
    finite = np.isfinite(values)
    for iy in range(ny - 1):
        for ix in range(nx - 1):
            if not (finite[iy, ix] and finite[iy, ix + 1]
                    and finite[iy + 1, ix] and finite[iy + 1, ix + 1]):
                skipped.append((iy, ix))
                continue
            segments.extend(_cell_segments(
                xs[ix], xs[ix + 1], ys[iy], ys[iy + 1],
                values[iy, ix], values[iy, ix + 1],
                values[iy + 1, ix], values[iy + 1, ix + 1], level))
    return _merge_segments(segments), skipped


@dataclass(frozen=True)
class LevelRender:
    levels: np.ndarray
    polylines: dict            # level index -> list of (L, 2) arrays
    skipped_cells: list
    warnings: list = field(default_factory=list)

    def svg(self, window: Window) -> str:
        return contour_svg(window, self.levels, self.polylines)


def render_levels(f: Expr, chart: Chart, window: Window,
                  n_levels: int = 15) -> LevelRender:
    """Contours of ``f`` at ``n_levels`` equally spaced values strictly
    between the grid minimum and maximum."""
    if chart.dim != 2:
        raise ValueError("level rendering needs a two-dimensional chart")
    nodes = window.nodes()
    try:
        values = eval_value_many(f, chart, nodes).reshape(window.ny, window.nx)
    except DomainError:
        # per-node evaluation so only offending cells are skipped
        values = np.full(len(nodes), np.nan)
        for i, p in enumerate(nodes):
            try:
                values[i] = eval_value_many(f, chart, p[None, :])[0]
            except DomainError:
                pass
        values = values.reshape(window.ny, window.nx)

    finite = values[np.isfinite(values)]
    warnings = []
    if finite.size == 0:
        warnings.append("function has no finite values on the window")
        return LevelRender(np.array([]), {}, [], warnings)
    vmin, vmax = float(finite.min()), float(finite.max())
    if vmin == vmax:
        warnings.append("function is constant on the window; no contours")
        return LevelRender(np.array([]), {}, [], warnings)
    step = (vmax - vmin) / (n_levels + 1)
    levels = vmin + step * np.arange(1, n_levels + 1)

    xs, ys = window.xs(), window.ys()
    polylines = {}
    skipped_all = []
    for i, level in enumerate(levels):
        lines, skipped = marching_squares(xs, ys, values, float(level))
        polylines[i] = lines
        if i == 0:
            skipped_all = skipped
    return LevelRender(levels, polylines, skipped_all, warnings)


def _fmt(x: float) -> str:
    return f"{x:.9g}"


def contour_svg(window: Window, levels: np.ndarray, polylines: dict) -> str:
    """SVG 1.1 document; viewBox matches the window (y axis flipped by
    mirroring coordinates inside the same box)."""
    width = window.x1 - window.x0
    height = window.y1 - window.y0
    stroke = max(width, height) / 400.0
    parts = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" version="1.1" '
        f'viewBox="{_fmt(window.x0)} {_fmt(window.y0)} {_fmt(width)} {_fmt(height)}">',
        f'<rect x="{_fmt(window.x0)}" y="{_fmt(window.y0)}" width="{_fmt(width)}" '
        f'height="{_fmt(height)}" fill="white"/>',
    ]
    flip = window.y0 + window.y1
    for i in sorted(polylines):
        shade = 20 + int(60.0 * i / max(1, len(levels) - 1))
        colour = f"rgb({shade}%,{shade}%,{shade}%)"
        for line in polylines[i]:
            pts = " ".join(f"{_fmt(x)},{_fmt(flip - y)}" for x, y in line)
            parts.append(f'<polyline fill="none" stroke="{colour}" '
                         f'stroke-width="{_fmt(stroke)}" points="{pts}"/>')
    parts.append("</svg>")
    return "\n".join(parts) + "\n"
