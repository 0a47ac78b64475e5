"""Protocol-derived navigation targets, occupancy grids and A* reachability checks."""

from __future__ import annotations

import heapq
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .assets import AssetBase
from .errors import NotFoundError
from .geometry import footprint
from .protocol import Protocol, ProtocolStep
from .scene import Layout, PlacedObject, wrap_degrees

OK = "ok"
START_BLOCKED = "start_blocked"
END_BLOCKED = "end_blocked"
PATH_BLOCKED = "path_blocked"
STATUSES = (OK, START_BLOCKED, END_BLOCKED, PATH_BLOCKED)

SQRT2 = math.sqrt(2.0)
COINCIDE_TOL = 1e-6


@dataclass(frozen=True)
class NavConfig:
    resolution: float = 0.05
    agent_radius: float = 0.3
    offset_radius: float = 0.3
    inflation: str = "rounded"  # or "box"

    def __post_init__(self):
        if not self.resolution > 0:
            raise ValueError("grid resolution must be positive")
        if self.agent_radius < 0 or self.offset_radius < 0:
            raise ValueError("radii must be non-negative")
        if self.inflation not in ("rounded", "box"):
            raise ValueError(f"unknown inflation mode {self.inflation!r}")


@dataclass(frozen=True)
class NavTarget:
    x: float
    y: float
    theta: float  # degrees
    step: int = -1
    target_id: str = ""

    def __post_init__(self):
        object.__setattr__(self, "theta", wrap_degrees(self.theta))

    @property
    def xy(self) -> np.ndarray:
        return np.array([self.x, self.y])

    def as_radians(self) -> tuple[float, float, float]:
        return (self.x, self.y, math.radians(self.theta))

    def coincides(self, other: "NavTarget") -> bool:
        dtheta = abs(self.theta - other.theta) % 360.0
        return (
            math.hypot(self.x - other.x, self.y - other.y) <= COINCIDE_TOL
            and min(dtheta, 360.0 - dtheta) <= COINCIDE_TOL
        )


@dataclass(frozen=True)
class GoalPair:
    start: NavTarget
    end: NavTarget


# -- target generation ------------------------------------------------------


def approach_distance(d_y: float, offset_radius: float) -> float:
    return d_y / 2.0 + 2.0 * offset_radius


def approach_offset(dist: float, rz: float) -> tuple[float, float]:
    a = math.radians(rz)
    return -dist * math.sin(a), -dist * math.cos(a)


def robot_theta(rz: float) -> float:
    return (rz + 180.0) % 360.0


def resolve_nav_object(obj: PlacedObject, layout: Layout, base: AssetBase) -> PlacedObject:
    """A desktop item is approached through its parent when the parent's footprint is larger."""
    if obj.on_floor:
        return obj
    if obj.initial_location not in layout:
        raise NotFoundError(f"parent {obj.initial_location!r} of {obj.instance_id} is not placed")
    parent = layout.get(obj.initial_location)
    if base[parent.asset_id].footprint_area > base[obj.asset_id].footprint_area:
        return parent
    return obj


def target_for_object(obj: PlacedObject, layout: Layout, base: AssetBase, offset_radius: float, step: int = -1) -> NavTarget:
    target = resolve_nav_object(obj, layout, base)
    rz = target.pose.yaw
    dist = approach_distance(base[target.asset_id].bbox.short_side, offset_radius)
    dx, dy = approach_offset(dist, rz)
    return NavTarget(target.pose.x + dx, target.pose.y + dy, robot_theta(rz), step, target.instance_id)


def step_object(step: ProtocolStep, layout: Layout, base: AssetBase) -> PlacedObject:
    """First placed asset the step uses, else the placed asset named by its location."""
    for name in (*step.assets_used, step.location):
        rec = base.try_resolve(name)
        if rec is None:
            continue
        placed = layout.instances_of(rec.asset_id)
        if placed:
            return placed[0]
    raise NotFoundError(f"step {step.index}: none of its assets or location is placed")


def nav_target_for(step: ProtocolStep, layout: Layout, base: AssetBase, offset_radius: float = 0.3) -> NavTarget:
    return target_for_object(step_object(step, layout, base), layout, base, offset_radius, step.index)


def step_targets(
    protocol: Protocol, layout: Layout, base: AssetBase, offset_radius: float = 0.3, strict: bool = True
) -> list[NavTarget]:
    out = []
    for step in protocol.steps:
        try:
            out.append(nav_target_for(step, layout, base, offset_radius))
        except NotFoundError:
            if strict:
                raise
    return out


def pair_targets(targets: Sequence[NavTarget]) -> list[GoalPair]:
    return [GoalPair(a, b) for a, b in zip(targets, targets[1:]) if not a.coincides(b)]


def goal_pairs(
    protocol: Protocol, layout: Layout, base: AssetBase, offset_radius: float = 0.3, strict: bool = True
) -> list[GoalPair]:
    return pair_targets(step_targets(protocol, layout, base, offset_radius, strict))


def goal_pairs_to_dict(pairs: Sequence[GoalPair], num_targets: int, decimals: int | None = 3) -> dict:
    def pose(t: NavTarget):
        vals = t.as_radians()
        return [round(v, decimals) if decimals is not None else v for v in vals]

    return {
        "goal_pairs": [{"start": pose(p.start), "end": pose(p.end)} for p in pairs],
        "num_targets": num_targets,
        "num_goal_pairs": len(pairs),
    }


def goal_pairs_to_json(pairs: Sequence[GoalPair], num_targets: int, decimals: int | None = 3) -> str:
    return json.dumps(goal_pairs_to_dict(pairs, num_targets, decimals), indent=2) + "\n"


def goal_pairs_from_dict(data: Mapping) -> tuple[list[GoalPair], int]:
    def target(v):
        x, y, th = (float(a) for a in v)
        return NavTarget(x, y, math.degrees(th))

    pairs = [GoalPair(target(p["start"]), target(p["end"])) for p in data["goal_pairs"]]
    return pairs, int(data.get("num_targets", len(pairs) + 1))


def load_goal_pairs(path: str | Path) -> tuple[list[GoalPair], int]:
    return goal_pairs_from_dict(json.loads(Path(path).read_text(encoding="utf-8")))


# -- occupancy grid -----------------------------------------------------------


@dataclass(eq=False)
class OccupancyGrid:
    resolution: float
    origin: tuple[float, float]
    occupied: np.ndarray  # bool, shape (rows=y cells, cols=x cells)
    inflated: bool = True

    @property
    def width(self) -> int:
        return self.occupied.shape[1]

    @property
    def height(self) -> int:
        return self.occupied.shape[0]

    def cell_of(self, x: float, y: float) -> tuple[int, int] | None:
        """(col, row) containing the point, or None outside the grid."""
        i = math.floor((x - self.origin[0]) / self.resolution)
        j = math.floor((y - self.origin[1]) / self.resolution)
        if 0 <= i < self.width and 0 <= j < self.height:
            return i, j
        return None

    def center_of(self, cell: tuple[int, int]) -> tuple[float, float]:
        i, j = cell
        return (self.origin[0] + (i + 0.5) * self.resolution, self.origin[1] + (j + 0.5) * self.resolution)

    def is_free(self, cell: tuple[int, int] | None) -> bool:
        return cell is not None and not bool(self.occupied[cell[1], cell[0]])

    def free_fraction(self) -> float:
        return float((~self.occupied).mean())

    def to_pgm(self) -> bytes:
        """Binary P5 image, 0 = occupied, 255 = free, top row = far wall."""
        img = np.where(self.occupied, 0, 255).astype(np.uint8)[::-1]
        header = f"P5\n{self.width} {self.height}\n255\n".encode("ascii")
        return header + img.tobytes()

    def save_pgm(self, path: str | Path) -> None:
        Path(path).write_bytes(self.to_pgm())


def cell_centers(width_cells: int, height_cells: int, resolution: float, origin=(0.0, 0.0)) -> np.ndarray:
    xs = origin[0] + (np.arange(width_cells) + 0.5) * resolution
    ys = origin[1] + (np.arange(height_cells) + 0.5) * resolution
    gx, gy = np.meshgrid(xs, ys)
    return np.stack([gx, gy], axis=-1)


def inflated_mask(fp, points: np.ndarray, radius: float, mode: str = "rounded") -> np.ndarray:
    """Points inside the footprint grown by ``radius`` (closed set)."""
    q = np.abs(fp.to_local(points)) - fp.half_extents
    if mode == "box":
        return np.all(q <= radius + 1e-12, axis=-1)
    outside = np.linalg.norm(np.maximum(q, 0.0), axis=-1)
    inside = np.minimum(q.max(axis=-1), 0.0)
    return outside + inside <= radius + 1e-12


def rasterize(layout: Layout, base: AssetBase, config: NavConfig = NavConfig()) -> OccupancyGrid:
    room = layout.room
    res = config.resolution
    nx = max(1, math.ceil(room.width / res - 1e-9))
    ny = max(1, math.ceil(room.depth / res - 1e-9))
    pts = cell_centers(nx, ny, res)
    xmin, ymin, xmax, ymax = room.interior
    r = config.agent_radius
    # walls grow inward by the agent radius
    occ = ~(
        (pts[..., 0] >= xmin + r)
        & (pts[..., 0] <= xmax - r)
        & (pts[..., 1] >= ymin + r)
        & (pts[..., 1] <= ymax - r)
    )
    for obj in layout.floor_objects():
        occ |= inflated_mask(footprint(obj, base[obj.asset_id]), pts, r, config.inflation)
    return OccupancyGrid(res, (0.0, 0.0), occ)


# -- planning ---------------------------------------------------------------


@dataclass(frozen=True)
class NavOutcome:
    status: str
    path: tuple[tuple[int, int], ...] | None = None
    length: float = 0.0
    straight_steps: int = 0
    diagonal_steps: int = 0

    @property
    def ok(self) -> bool:
        return self.status == OK

    def to_dict(self) -> dict:
        return {"status": self.status, "length": self.length, "cells": None if self.path is None else len(self.path)}


_MOVES = [(1, 0), (-1, 0), (0, 1), (0, -1), (1, 1), (1, -1), (-1, 1), (-1, -1)]


def octile(a: tuple[int, int], b: tuple[int, int]) -> float:
    dx, dy = abs(a[0] - b[0]), abs(a[1] - b[1])
    return max(dx, dy) + (SQRT2 - 1.0) * min(dx, dy)


def neighbors(occupied: np.ndarray, cell: tuple[int, int]):
    """8-connected moves; a diagonal needs both orthogonal cells free (no corner cutting)."""
    h, w = occupied.shape
    i, j = cell
    for di, dj in _MOVES:
        ni, nj = i + di, j + dj
        if not (0 <= ni < w and 0 <= nj < h) or occupied[nj, ni]:
            continue
        if di and dj and (occupied[j, ni] or occupied[nj, i]):
            continue
        yield (ni, nj), bool(di and dj)


def astar(occupied: np.ndarray, start: tuple[int, int], goal: tuple[int, int]) -> list[tuple[int, int]] | None:
    """Optimal 8-connected path in cell units, or None if disconnected."""
    if start == goal:
        return [start]
    g = {start: 0.0}
    parent = {start: None}
    heap = [(octile(start, goal), 0.0, start)]
    closed = set()
    while heap:
        _, gc, cell = heapq.heappop(heap)
        if cell in closed:
            continue
        if cell == goal:
            path = [cell]
            while parent[path[-1]] is not None:
                path.append(parent[path[-1]])
            return path[::-1]
        closed.add(cell)
        for nb, diag in neighbors(occupied, cell):
            if nb in closed:
                continue
            ng = gc + (SQRT2 if diag else 1.0)
            if ng < g.get(nb, math.inf) - 1e-12:
                g[nb] = ng
                parent[nb] = cell
                heapq.heappush(heap, (ng + octile(nb, goal), ng, nb))
    return None


def _count_steps(path: Sequence[tuple[int, int]]) -> tuple[int, int]:
    diag = sum(1 for a, b in zip(path, path[1:]) if a[0] != b[0] and a[1] != b[1])
    return len(path) - 1 - diag, diag


def plan_cells(occupied: np.ndarray, start, goal, resolution: float = 1.0) -> NavOutcome:
    """Plan between cells; None or occupied endpoints map to the failure taxonomy."""
    h, w = occupied.shape

    def free(c):
        return c is not None and 0 <= c[0] < w and 0 <= c[1] < h and not occupied[c[1], c[0]]

    if not free(start):
        return NavOutcome(START_BLOCKED)
    if not free(goal):
        return NavOutcome(END_BLOCKED)
    path = astar(occupied, tuple(start), tuple(goal))
    if path is None:
        return NavOutcome(PATH_BLOCKED)
    straight, diag = _count_steps(path)
    return NavOutcome(OK, tuple(path), resolution * (straight + SQRT2 * diag), straight, diag)


def plan(grid: OccupancyGrid, start, goal) -> NavOutcome:
    """Plan between world points (anything with x, y or a 2-sequence)."""

    def cell(p):
        x, y = (p.x, p.y) if hasattr(p, "x") else (p[0], p[1])
        return grid.cell_of(x, y)

    return plan_cells(grid.occupied, cell(start), cell(goal), grid.resolution)


def path_to_world(grid: OccupancyGrid, path: Sequence[tuple[int, int]]) -> list[tuple[float, float]]:
    return [grid.center_of(c) for c in path]


@dataclass
class ReachReport:
    pairs: list[GoalPair]
    outcomes: list[NavOutcome]
    num_targets: int
    grid: OccupancyGrid | None = field(default=None, repr=False)

    @property
    def unreachable(self) -> int:
        return sum(not o.ok for o in self.outcomes)

    @property
    def total(self) -> int:
        return len(self.outcomes)

    @property
    def f_reach(self) -> int:
        return int(self.unreachable == 0)

    @property
    def failures(self) -> list[tuple[GoalPair, NavOutcome]]:
        return [(p, o) for p, o in zip(self.pairs, self.outcomes) if not o.ok]

    def status_counts(self) -> dict[str, int]:
        return {s: sum(o.status == s for o in self.outcomes) for s in STATUSES}


def check_pairs(grid: OccupancyGrid, pairs: Sequence[GoalPair]) -> list[NavOutcome]:
    return [plan(grid, p.start, p.end) for p in pairs]


def reachability(
    layout: Layout, protocol: Protocol, base: AssetBase, config: NavConfig = NavConfig(), strict: bool = True
) -> ReachReport:
    targets = step_targets(protocol, layout, base, config.offset_radius, strict)
    pairs = pair_targets(targets)
    grid = rasterize(layout, base, config)
    return ReachReport(pairs, check_pairs(grid, pairs), len(targets), grid)


def f_reach(
    layout: Layout, protocol: Protocol, base: AssetBase, config: NavConfig = NavConfig()
) -> tuple[int, list[NavOutcome]]:
    report = reachability(layout, protocol, base, config)
    return report.f_reach, report.outcomes
