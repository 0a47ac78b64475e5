"""Top-down SVG rendering of layouts, occupancy grids, paths and navigation targets.

Scale is 100 px per meter with the y axis flipped for screen convention, so a
world point (x, y) maps to (100 x, 100 (D - y)) where D is the room depth. No
padding is added: the room rectangle spans the whole canvas.
"""

from __future__ import annotations

import math
from pathlib import Path
from typing import Iterable, Sequence
from xml.sax.saxutils import escape, quoteattr

import numpy as np

from .assets import AssetBase
from .geometry import footprint
from .navigation import NavTarget, OccupancyGrid
from .scene import Layout

PX_PER_M = 100.0
ARROW_LEN = 0.3  # meters


def _num(v: float) -> str:
    s = f"{v:.3f}".rstrip("0").rstrip(".")
    return "0" if s in ("-0", "") else s


def to_screen(x: float, y: float, depth: float) -> tuple[float, float]:
    return x * PX_PER_M, (depth - y) * PX_PER_M


def _points(xy: Iterable, depth: float) -> str:
    return " ".join(f"{_num(sx)},{_num(sy)}" for sx, sy in (to_screen(x, y, depth) for x, y in xy))


def _grid_rects(grid: OccupancyGrid, depth: float) -> list[str]:
    """Occupied cells merged into horizontal runs, one rect per run."""
    out = []
    res = grid.resolution
    for row in range(grid.occupied.shape[0]):
        line = grid.occupied[row]
        col = 0
        while col < line.size:
            if not line[col]:
                col += 1
                continue
            start = col
            while col < line.size and line[col]:
                col += 1
            x0 = grid.origin[0] + start * res
            y1 = grid.origin[1] + (row + 1) * res
            sx, sy = to_screen(x0, y1, depth)
            out.append(
                f'<rect class="occupied" x="{_num(sx)}" y="{_num(sy)}" '
                f'width="{_num((col - start) * res * PX_PER_M)}" height="{_num(res * PX_PER_M)}"/>'
            )
    return out


def render_svg(
    layout: Layout,
    base: AssetBase | None = None,
    grid: OccupancyGrid | None = None,
    paths: Sequence[Sequence[tuple[float, float]]] = (),
    targets: Sequence[NavTarget] = (),
    unsafe_pairs: Iterable[tuple[str, str]] = (),
) -> str:
    """Return the SVG document as a string. Objects need ``base`` for their footprints."""
    room = layout.room
    w, d = room.width * PX_PER_M, room.depth * PX_PER_M
    lines = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{_num(w)}" height="{_num(d)}" '
        f'viewBox="0 0 {_num(w)} {_num(d)}">',
        f'<rect class="room" x="0" y="0" width="{_num(w)}" height="{_num(d)}" fill="white" stroke="black"/>',
    ]
    if grid is not None:
        lines.append('<g class="grid" fill="#cccccc" fill-opacity="0.5">')
        lines.extend(_grid_rects(grid, room.depth))
        lines.append("</g>")

    unsafe = {i for pair in unsafe_pairs for i in pair}
    if layout.objects and base is None:
        raise ValueError("rendering objects requires the asset base")
    for obj in sorted(layout.objects, key=lambda o: (not o.on_floor, o.instance_id)):
        fp = footprint(obj, base[obj.asset_id])
        cls = "object" if obj.on_floor else "item"
        if obj.instance_id in unsafe:
            cls += " unsafe"
        color = "#d62728" if obj.instance_id in unsafe else ("#9ecae1" if obj.on_floor else "#fdd0a2")
        lines.append(
            f'<polygon class="{cls}" data-id={quoteattr(obj.instance_id)} data-asset={quoteattr(obj.asset_id)} '
            f'points="{_points(fp.corners, room.depth)}" fill="{color}" stroke="black" stroke-width="1"/>'
        )
        if obj.on_floor:
            sx, sy = to_screen(*obj.pose.xy, room.depth)
            lines.append(
                f'<text class="label" x="{_num(sx)}" y="{_num(sy)}" font-size="10" '
                f'text-anchor="middle">{escape(obj.asset_id)}</text>'
            )

    for p_idx, path in enumerate(paths):
        if len(path) < 2:
            continue
        lines.append(
            f'<polyline class="path" data-index="{p_idx}" points="{_points(path, room.depth)}" '
            'fill="none" stroke="#2ca02c" stroke-width="2"/>'
        )

    for t_idx, t in enumerate(targets):
        sx, sy = to_screen(t.x, t.y, room.depth)
        rad = math.radians(t.theta)
        tip = np.array([t.x, t.y]) + ARROW_LEN * np.array([math.cos(rad), math.sin(rad)])
        ex, ey = to_screen(tip[0], tip[1], room.depth)
        lines.append(
            f'<g class="target" data-index="{t_idx}" data-step="{t.step}">'
            f'<circle cx="{_num(sx)}" cy="{_num(sy)}" r="5" fill="#1f77b4"/>'
            f'<line x1="{_num(sx)}" y1="{_num(sy)}" x2="{_num(ex)}" y2="{_num(ey)}" stroke="#1f77b4" stroke-width="2"/>'
            "</g>"
        )
    lines.append("</svg>")
    return "\n".join(lines) + "\n"


def save_svg(path: str | Path, layout: Layout, base: AssetBase | None = None, **kwargs) -> None:
    Path(path).write_text(render_svg(layout, base, **kwargs), encoding="utf-8")
