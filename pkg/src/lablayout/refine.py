"""Navigation-aware refinement: turn A* failures into translation/rotation fixes and iterate."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy import ndimage

from .assets import AssetBase
from .commands import apply_rotation, apply_translation, rotate_by, translate_axis, yaw_delta
from .geometry import footprint, overlap, room_footprint
from .navigation import (
    END_BLOCKED,
    PATH_BLOCKED,
    START_BLOCKED,
    NavConfig,
    NavTarget,
    OccupancyGrid,
    approach_offset,
    cell_centers,
    inflated_mask,
    reachability,
)
from .optimizer import fast_repair, geometric_violations
from .protocol import Protocol
from .proposers import interior_facing_yaw
from .scene import Layout, PlacedObject

FOUR_CONNECTED = ndimage.generate_binary_structure(2, 1)


@dataclass(frozen=True)
class RefineConfig:
    nav: NavConfig = NavConfig()
    max_iterations: int = 10
    epsilon: float = 0.5  # percentage points
    stall_limit: int = 3
    clearance_margin: float = 0.1
    facing_threshold: float = 30.0  # degrees
    repair_rounds: int = 50
    repair_margin: float = 0.02

    def __post_init__(self):
        if self.max_iterations < 1:
            raise ValueError("refinement needs at least one iteration")


@dataclass(frozen=True)
class AdjustmentSuggestion:
    instance_id: str
    kind: str  # "translation" | "rotation"
    axis: str = ""  # "x" | "y" for translations
    delta: float = 0.0  # meters for translations, degrees for rotations
    target_theta: float | None = None
    reason: str = ""

    def __post_init__(self):
        if self.kind == "translation" and (self.axis not in ("x", "y") or self.delta == 0):
            raise ValueError("translations need an axis and a nonzero delta")

    @property
    def group(self) -> tuple[str, str]:
        return (self.instance_id, self.axis if self.kind == "translation" else "theta")

    def to_dict(self) -> dict:
        out = {"id": self.instance_id, "kind": self.kind, "reason": self.reason}
        if self.kind == "translation":
            out.update(axis=self.axis, delta=self.delta)
        else:
            out.update(target_theta=self.target_theta, delta_theta=self.delta)
        return out


def unreachable_ratio(u: int, n: int) -> float:
    return 100.0 * u / n if n > 0 else 0.0


# -- analysis ---------------------------------------------------------------------


def _wall_deficits(point, layout: Layout, r: float, slack: float = 0.0) -> list[tuple[str, float, np.ndarray]]:
    """(axis, deficit, outward normal) for each wall band the point sits in (or within ``slack`` of)."""
    xmin, ymin, xmax, ymax = layout.room.interior
    x, y = point
    out = []
    for axis, deficit, normal in (
        ("x", xmin + r - x, (-1.0, 0.0)),
        ("x", x - (xmax - r), (1.0, 0.0)),
        ("y", ymin + r - y, (0.0, -1.0)),
        ("y", y - (ymax - r), (0.0, 1.0)),
    ):
        if deficit >= -slack:
            out.append((axis, deficit, np.array(normal)))
    return out


def _exit_shift(fp, point, radius: float, direction: np.ndarray) -> float:
    """Smallest t >= 0 such that moving ``fp`` by t*direction leaves ``point`` outside its box inflation."""
    local = fp.to_local(np.asarray(point, dtype=float))
    step = fp.rotation.T @ direction  # local displacement of the point per unit move is -step
    h = fp.half_extents + radius
    best = math.inf
    for k in range(2):
        if abs(step[k]) < 1e-12:
            continue
        # the point leaves slab k once |local[k] - t*step[k]| > h[k]
        for bound in (h[k], -h[k]):
            t = (local[k] - bound) / step[k]
            if t >= 0:
                best = min(best, t)
    return best


def _in_bounds_after(layout: Layout, obj: PlacedObject, base: AssetBase, delta) -> bool:
    fp = footprint(obj, base[obj.asset_id]).translated(delta)
    return bool(room_footprint(layout.room).contains(fp.corners, 1e-9).all())


def _collides_after(layout: Layout, obj: PlacedObject, base: AssetBase, delta) -> bool:
    fp = footprint(obj, base[obj.asset_id]).translated(delta)
    return any(
        overlap(footprint(o, base[o.asset_id]), fp).overlapping
        for o in layout.floor_objects()
        if o.instance_id != obj.instance_id
    )


def _blocker_fixes(
    point, target_id: str, layout: Layout, base: AssetBase, config: RefineConfig, reason: str
) -> list[AdjustmentSuggestion]:
    r = config.nav.agent_radius
    out = []
    for obj in layout.floor_objects():
        fp = footprint(obj, base[obj.asset_id])
        if not inflated_mask(fp, np.asarray(point)[None, :], r, config.nav.inflation)[0]:
            continue
        if obj.instance_id == target_id:
            yaw = interior_facing_yaw(obj.pose.xy, layout.room)
            if abs(yaw_delta(obj.pose.yaw, yaw)) > 1e-9:
                out.append(AdjustmentSuggestion(obj.instance_id, "rotation", delta=yaw_delta(obj.pose.yaw, yaw), target_theta=yaw, reason=reason))
            continue
        options = []
        for axis, direction in (("x", (1.0, 0.0)), ("x", (-1.0, 0.0)), ("y", (0.0, 1.0)), ("y", (0.0, -1.0))):
            d = np.array(direction)
            t = _exit_shift(fp, point, r, d)
            if not math.isfinite(t):
                continue
            shift = t + config.clearance_margin
            delta = shift * d
            bad = (not _in_bounds_after(layout, obj, base, delta), _collides_after(layout, obj, base, delta))
            options.append((bad, shift, axis, float(delta[0] + delta[1])))
        if options:
            options.sort(key=lambda o: (o[0], o[1], o[2], o[3]))
            _, _, axis, delta = options[0]
            out.append(AdjustmentSuggestion(obj.instance_id, "translation", axis, delta, reason=reason))
    return out


def _endpoint_fixes(
    target: NavTarget, layout: Layout, base: AssetBase, config: RefineConfig, reason: str
) -> list[AdjustmentSuggestion]:
    out = []
    point = (target.x, target.y)
    r = config.nav.agent_radius
    owner = layout.get(target.target_id) if target.target_id in layout else None
    for axis, deficit, normal in _wall_deficits(point, layout, r, config.nav.resolution):
        if owner is None:
            continue
        approach = np.array(approach_offset(1.0, owner.pose.yaw))
        angle = math.degrees(math.acos(float(np.clip(approach @ normal, -1.0, 1.0))))
        if angle <= config.facing_threshold:
            yaw = interior_facing_yaw(owner.pose.xy, layout.room)
            out.append(
                AdjustmentSuggestion(
                    owner.instance_id, "rotation", delta=yaw_delta(owner.pose.yaw, yaw), target_theta=yaw, reason=f"{reason}: faces wall"
                )
            )
        else:
            sign = -float(normal[0] + normal[1])
            out.append(
                AdjustmentSuggestion(owner.instance_id, "translation", axis, sign * (max(deficit, 0.0) + config.clearance_margin), reason=f"{reason}: wall clearance")
            )
    out.extend(_blocker_fixes(point, target.target_id, layout, base, config, f"{reason}: inside obstacle"))
    return out


def _object_masks(layout: Layout, base: AssetBase, pts: np.ndarray, config: NavConfig) -> dict[str, np.ndarray]:
    return {
        o.instance_id: inflated_mask(footprint(o, base[o.asset_id]), pts, config.agent_radius, config.inflation)
        for o in layout.floor_objects()
    }


def _connected(free: np.ndarray, a: tuple[int, int], b: tuple[int, int]) -> bool:
    if not (free[a[1], a[0]] and free[b[1], b[0]]):
        return False
    labels, _ = ndimage.label(free, structure=FOUR_CONNECTED)
    return labels[a[1], a[0]] == labels[b[1], b[0]]


def _corridor_fix(
    start: NavTarget, end: NavTarget, layout: Layout, base: AssetBase, grid: OccupancyGrid, config: RefineConfig
) -> list[AdjustmentSuggestion]:
    """Nudge the smallest obstacle whose removal reconnects start and goal, across the chord."""
    a, b = grid.cell_of(start.x, start.y), grid.cell_of(end.x, end.y)
    if a is None or b is None:
        return []
    pts = cell_centers(grid.width, grid.height, grid.resolution, grid.origin)
    masks = _object_masks(layout, base, pts, config.nav)
    walls = _wall_band(grid, layout, config.nav.agent_radius)
    chord = np.array([end.x - start.x, end.y - start.y])
    perp_axis = "y" if abs(chord[0]) >= abs(chord[1]) else "x"
    order = sorted(layout.floor_objects(), key=lambda o: (base[o.asset_id].footprint_area, o.instance_id))

    def others_occ(skip: str) -> np.ndarray:
        occ = walls.copy()
        for iid, m in masks.items():
            if iid != skip:
                occ |= m
        return occ

    cut = [o for o in order if _connected(~others_occ(o.instance_id), a, b)]
    candidates = cut or order
    for obj in candidates:
        base_occ = others_occ(obj.instance_id)
        fp = footprint(obj, base[obj.asset_id])
        best = None
        limit = max(layout.room.width, layout.room.depth)
        axes = (perp_axis, "x" if perp_axis == "y" else "y")
        for axis in axes:
            unit = np.array([1.0, 0.0]) if axis == "x" else np.array([0.0, 1.0])
            k = 1
            while k * grid.resolution <= limit and best is None:
                for sign in (1.0, -1.0):
                    shift = sign * k * grid.resolution
                    delta = unit * shift
                    if not _in_bounds_after(layout, obj, base, delta) or _collides_after(layout, obj, base, delta):
                        continue
                    moved = inflated_mask(fp.translated(delta), pts, config.nav.agent_radius, config.nav.inflation)
                    if _connected(~(base_occ | moved), a, b):
                        total = shift + sign * config.clearance_margin
                        padded = unit * total
                        if _in_bounds_after(layout, obj, base, padded) and not _collides_after(layout, obj, base, padded):
                            shift = total
                        best = AdjustmentSuggestion(obj.instance_id, "translation", axis, float(shift), reason="path_blocked: corridor")
                        break
                k += 1
            if best is not None:
                return [best]
    return []


def _wall_band(grid: OccupancyGrid, layout: Layout, r: float) -> np.ndarray:
    pts = cell_centers(grid.width, grid.height, grid.resolution, grid.origin)
    xmin, ymin, xmax, ymax = layout.room.interior
    return ~(
        (pts[..., 0] >= xmin + r) & (pts[..., 0] <= xmax - r) & (pts[..., 1] >= ymin + r) & (pts[..., 1] <= ymax - r)
    )


def analyze(
    layout: Layout, protocol: Protocol, base: AssetBase, config: RefineConfig = RefineConfig(), report=None
) -> list[AdjustmentSuggestion]:
    report = report or reachability(layout, protocol, base, config.nav)
    out: list[AdjustmentSuggestion] = []
    for pair, outcome in report.failures:
        if outcome.status == START_BLOCKED:
            out.extend(_endpoint_fixes(pair.start, layout, base, config, START_BLOCKED))
        elif outcome.status == END_BLOCKED:
            out.extend(_endpoint_fixes(pair.end, layout, base, config, END_BLOCKED))
        elif outcome.status == PATH_BLOCKED:
            out.extend(_corridor_fix(pair.start, pair.end, layout, base, report.grid, config))
    return out


def dedup(suggestions: Sequence[AdjustmentSuggestion]) -> list[AdjustmentSuggestion]:
    """One suggestion per (object, axis), the one with the largest magnitude."""
    best: dict[tuple[str, str], AdjustmentSuggestion] = {}
    for s in suggestions:
        key = s.group
        if key not in best or abs(s.delta) > abs(best[key].delta):
            best[key] = s
    return [best[k] for k in sorted(best)]


def apply_suggestions(layout: Layout, suggestions: Sequence[AdjustmentSuggestion]) -> Layout:
    """Translations first, then rotations, each group ordered by object id."""
    out = layout
    ordered = sorted(suggestions, key=lambda s: (s.kind != "translation", s.instance_id, s.axis))
    for s in ordered:
        if s.kind == "translation":
            out = translate_axis(out, s.instance_id, s.axis, s.delta)
        else:
            out = apply_rotation(out, s.instance_id, s.target_theta)
    return out


# -- loop -------------------------------------------------------------------------------


@dataclass
class RefineRecord:
    t: int
    U: int
    N: int
    r: float
    applied: list = field(default_factory=list)
    statuses: dict = field(default_factory=dict)
    repaired: bool = False

    def to_dict(self) -> dict:
        return {
            "t": self.t,
            "U": self.U,
            "N": self.N,
            "r": self.r,
            "applied": self.applied,
            "statuses": self.statuses,
            "repaired": self.repaired,
        }


def history_to_jsonl(history: Sequence[RefineRecord]) -> str:
    return "".join(json.dumps(h.to_dict(), sort_keys=True) + "\n" for h in history)


def refine_loop(
    layout: Layout, protocol: Protocol, base: AssetBase, config: RefineConfig = RefineConfig()
) -> tuple[Layout, list[RefineRecord]]:
    history: list[RefineRecord] = []
    current = layout
    best_u, stall = math.inf, 0
    for t in range(1, config.max_iterations + 1):
        report = reachability(current, protocol, base, config.nav)
        u, n = report.unreachable, report.total
        rec = RefineRecord(t, u, n, unreachable_ratio(u, n), statuses=report.status_counts())
        history.append(rec)
        if u == 0:
            break
        if len(history) > 1 and abs(rec.r - history[-2].r) < config.epsilon:
            break
        stall = 0 if u < best_u else stall + 1
        best_u = min(best_u, u)
        if stall >= config.stall_limit or t == config.max_iterations:
            break
        suggestions = dedup(analyze(current, protocol, base, config, report))
        if not suggestions:
            break
        before = geometric_violations(current, base).v_geo
        current = apply_suggestions(current, suggestions)
        rec.applied = [s.to_dict() for s in suggestions]
        if geometric_violations(current, base).v_geo > before:
            current = fast_repair(current, base, config.repair_rounds, config.repair_margin).layout
            rec.repaired = True
    return current, history


__all__ = [
    "AdjustmentSuggestion",
    "RefineConfig",
    "RefineRecord",
    "analyze",
    "apply_rotation",
    "apply_suggestions",
    "apply_translation",
    "dedup",
    "history_to_jsonl",
    "refine_loop",
    "rotate_by",
    "unreachable_ratio",
]
