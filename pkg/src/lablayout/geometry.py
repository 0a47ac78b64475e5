"""Rotation-aware rectangular footprints and the collision/boundary primitives.

A footprint is the horizontal projection of an asset's bounding box: the long
side runs along the local x axis, the short side along local y, rotated by the
object's yaw about its center.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable

import numpy as np

from .assets import AssetBase, AssetRecord
from .errors import UnrepairableError
from .scene import Layout, PlacedObject, Room, rotation_matrix

# Overlaps thinner than this are treated as contact, not collision.
CONTACT_TOL = 1e-9

_UNIT = np.array([[-1.0, -1.0], [1.0, -1.0], [1.0, 1.0], [-1.0, 1.0]])


@dataclass(frozen=True, eq=False)
class Footprint:
    center: np.ndarray
    half_extents: np.ndarray  # (half long side, half short side)
    yaw: float

    @property
    def rotation(self) -> np.ndarray:
        return rotation_matrix(self.yaw)

    @property
    def corners(self) -> np.ndarray:
        """Corners counterclockwise, starting at local (-x, -y)."""
        return self.center + (_UNIT * self.half_extents) @ self.rotation.T

    @property
    def axes(self) -> np.ndarray:
        """Unit edge normals (local x and local y in world frame), as rows."""
        return self.rotation.T.copy()

    @property
    def area(self) -> float:
        return 4.0 * float(self.half_extents[0] * self.half_extents[1])

    def to_local(self, points) -> np.ndarray:
        return (np.asarray(points, dtype=float) - self.center) @ self.rotation

    def contains(self, points, pad: float = 0.0) -> np.ndarray:
        local = np.abs(self.to_local(points))
        return np.all(local <= self.half_extents + pad, axis=-1)

    def translated(self, delta) -> "Footprint":
        return Footprint(self.center + np.asarray(delta, dtype=float), self.half_extents, self.yaw)


def make_footprint(center, long_side: float, short_side: float, yaw: float) -> Footprint:
    return Footprint(np.asarray(center, dtype=float)[:2].copy(), np.array([long_side / 2.0, short_side / 2.0]), yaw)


def footprint(obj: PlacedObject, asset: AssetRecord) -> Footprint:
    return make_footprint((obj.pose.x, obj.pose.y), asset.bbox.long_side, asset.bbox.short_side, obj.pose.yaw)


@dataclass(frozen=True)
class PenetrationResult:
    overlapping: bool
    depth: float = 0.0
    direction: tuple[float, float] = (0.0, 0.0)

    def to_dict(self) -> dict:
        return {"overlapping": self.overlapping, "depth": self.depth, "direction": list(self.direction)}


NO_OVERLAP = PenetrationResult(False)


def _project(corners: np.ndarray, axis: np.ndarray) -> tuple[float, float]:
    d = corners @ axis
    return float(d.min()), float(d.max())


def separation_candidates(a: Footprint, b: Footprint) -> list[tuple[float, np.ndarray]]:
    """Every (distance, unit direction) that translates ``b`` clear of ``a`` along a SAT axis.

    Returns an empty list when the footprints do not overlap.
    """
    ca, cb = a.corners, b.corners
    out = []
    for axis in np.vstack([a.axes, b.axes]):
        amin, amax = _project(ca, axis)
        bmin, bmax = _project(cb, axis)
        push_pos = amax - bmin  # move b along +axis
        push_neg = bmax - amin  # move b along -axis
        if push_pos <= CONTACT_TOL or push_neg <= CONTACT_TOL:
            return []
        out.append((push_pos, axis.copy()))
        out.append((push_neg, -axis))
    return out


def overlap(a: Footprint, b: Footprint) -> PenetrationResult:
    """Separating-axis test; depth/direction give the minimal translation of ``b``."""
    cands = separation_candidates(a, b)
    if not cands:
        return NO_OVERLAP
    # prefer the direction pointing from a to b on exact ties
    offset = b.center - a.center
    depth, direction = min(cands, key=lambda c: (c[0], -float(c[1] @ offset)))
    return PenetrationResult(True, float(depth), (float(direction[0]), float(direction[1])))


def containment_correction(fp: Footprint, container: Footprint) -> np.ndarray | None:
    """Minimal translation that puts ``fp`` inside the rectangle ``container``.

    Computed in the container's frame, so rotated tabletops work the same as
    axis-aligned rooms. Raises UnrepairableError when ``fp`` cannot fit.
    """
    local = container.to_local(fp.corners)
    lo, hi = local.min(axis=0), local.max(axis=0)
    limit = container.half_extents
    if np.any(hi - lo > 2 * limit + CONTACT_TOL):
        raise UnrepairableError(f"footprint {hi - lo} larger than container {2 * limit}")
    shift = np.maximum(0.0, -limit - lo) - np.maximum(0.0, hi - limit)
    shift[np.abs(shift) <= CONTACT_TOL] = 0.0
    if not shift.any():
        return None
    return container.rotation @ shift


def room_footprint(room: Room) -> Footprint:
    xmin, ymin, xmax, ymax = room.interior
    return make_footprint(((xmin + xmax) / 2, (ymin + ymax) / 2), xmax - xmin, ymax - ymin, 0.0)


def out_of_bounds(fp: Footprint, room: Room) -> np.ndarray | None:
    """Inward correction (dx, dy) for a footprint poking out of the room interior, or None."""
    return containment_correction(fp, room_footprint(room))


def tabletop_footprint(parent: PlacedObject, parent_asset: AssetRecord) -> Footprint:
    return footprint(parent, parent_asset)


def container_of(layout: Layout, obj: PlacedObject, base: AssetBase) -> Footprint:
    """Room interior for floor objects, the parent tabletop for desktop items."""
    if obj.on_floor:
        return room_footprint(layout.room)
    parent = layout.get(obj.initial_location)
    return footprint(parent, base[parent.asset_id])


def bounds_correction(layout: Layout, obj: PlacedObject, base: AssetBase) -> np.ndarray | None:
    return containment_correction(footprint(obj, base[obj.asset_id]), container_of(layout, obj, base))


def collision_groups(layout: Layout) -> list[list[PlacedObject]]:
    """Same-level groups whose members are tested against each other."""
    groups = [layout.floor_objects()]
    groups.extend(layout.surface_groups().values())
    return groups


def pairwise_collisions(layout: Layout, base: AssetBase) -> list[tuple[str, str, PenetrationResult]]:
    """Colliding same-level pairs, earlier object first, in layout order."""
    out = []
    for group in collision_groups(layout):
        fps = [footprint(o, base[o.asset_id]) for o in group]
        for i in range(len(group)):
            for j in range(i + 1, len(group)):
                res = overlap(fps[i], fps[j])
                if res.overlapping:
                    out.append((group[i].instance_id, group[j].instance_id, res))
    return out


def tested_pair_count(layout: Layout) -> int:
    return sum(len(g) * (len(g) - 1) // 2 for g in collision_groups(layout))


def edge_distance(item: PlacedObject, item_asset: AssetRecord, parent: PlacedObject, parent_asset: AssetRecord) -> float:
    """Smallest corner-to-edge distance of ``item`` on its tabletop; negative on overhang."""
    if item.initial_location != parent.instance_id:
        raise ValueError(f"{item.instance_id} is not attached to {parent.instance_id}")
    top = footprint(parent, parent_asset)
    local = top.to_local(footprint(item, item_asset).corners)
    margins = np.hstack([top.half_extents - local, local + top.half_extents])
    return float(margins.min())


def centroid_distance(a: PlacedObject, b: PlacedObject) -> float:
    return math.hypot(a.pose.x - b.pose.x, a.pose.y - b.pose.y)


def union_bounds(footprints: Iterable[Footprint]) -> tuple[float, float, float, float]:
    pts = np.vstack([fp.corners for fp in footprints])
    return float(pts[:, 0].min()), float(pts[:, 1].min()), float(pts[:, 0].max()), float(pts[:, 1].max())


def violating_objects(layout: Layout, base: AssetBase) -> set[str]:
    """Instance ids with a boundary or same-level collision violation."""
    bad = set()
    for obj in layout.objects:
        try:
            if bounds_correction(layout, obj, base) is not None:
                bad.add(obj.instance_id)
        except UnrepairableError:
            bad.add(obj.instance_id)
    for a, b, _ in pairwise_collisions(layout, base):
        bad.update((a, b))
    return bad
