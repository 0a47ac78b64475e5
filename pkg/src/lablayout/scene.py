"""Rooms, posed objects, surface attachment and the layout JSON format.

Coordinates are global meters with the origin at the front-left floor corner of
the room, z up. Yaw is in degrees, counterclockwise, 0 meaning the asset's
canonical front (+y). Desktop items are stored in global coordinates; their
``initial_location`` names the surface they rest on.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Iterable, Iterator, Mapping

import numpy as np

from .assets import AssetBase, AssetRecord
from .errors import Issue, ValidationError, errors_only

FLOOR = "floor"
HEIGHT_TOL = 1e-6


def wrap_degrees(angle: float) -> float:
    """Map an angle into [0, 360)."""
    a = math.fmod(float(angle), 360.0)
    if a < 0:
        a += 360.0
    # fmod of tiny negatives can round up to exactly 360
    return 0.0 if a >= 360.0 else a


def rotation_matrix(yaw_deg: float) -> np.ndarray:
    a = math.radians(yaw_deg)
    c, s = math.cos(a), math.sin(a)
    return np.array([[c, -s], [s, c]])


@dataclass(frozen=True)
class Pose:
    x: float
    y: float
    z: float = 0.0
    yaw: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "yaw", wrap_degrees(self.yaw))
        if self.z < 0:
            raise ValueError(f"pose z must be >= 0, got {self.z}")

    @property
    def xy(self) -> np.ndarray:
        return np.array([self.x, self.y])

    def translated(self, dx: float, dy: float) -> "Pose":
        return replace(self, x=self.x + dx, y=self.y + dy)


@dataclass(frozen=True)
class Room:
    width: float
    depth: float
    height: float = 3.0
    wall_thickness: float = 0.0

    def __post_init__(self):
        for name in ("width", "depth", "height"):
            if not getattr(self, name) > 0:
                raise ValueError(f"room {name} must be positive")
        if self.wall_thickness < 0 or 2 * self.wall_thickness >= min(self.width, self.depth):
            raise ValueError("wall_thickness leaves no usable interior")

    @property
    def interior(self) -> tuple[float, float, float, float]:
        """Usable interior as (xmin, ymin, xmax, ymax)."""
        t = self.wall_thickness
        return (t, t, self.width - t, self.depth - t)

    @property
    def center(self) -> np.ndarray:
        return np.array([self.width / 2.0, self.depth / 2.0])

    def to_dict(self) -> dict:
        return {"width": self.width, "depth": self.depth, "height": self.height, "wall_thickness": self.wall_thickness}

    @classmethod
    def from_dict(cls, data: Mapping) -> "Room":
        return cls(
            float(data["width"]),
            float(data["depth"]),
            float(data.get("height", 3.0)),
            float(data.get("wall_thickness", 0.0)),
        )


@dataclass(frozen=True)
class PlacedObject:
    instance_id: str
    asset_id: str
    pose: Pose
    initial_location: str = FLOOR

    @property
    def on_floor(self) -> bool:
        return self.initial_location == FLOOR

    def with_pose(self, pose: Pose) -> "PlacedObject":
        return replace(self, pose=pose)


@dataclass
class Layout:
    """A room plus its ordered objects. Treat instances as values: operators copy."""

    room: Room
    objects: list[PlacedObject] = field(default_factory=list)
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        self._index = {}
        self._reindex()

    def _reindex(self):
        self._index = {}
        for i, obj in enumerate(self.objects):
            if obj.instance_id in self._index:
                raise ValidationError(f"duplicate instance_id {obj.instance_id!r}")
            self._index[obj.instance_id] = i

    def __len__(self) -> int:
        return len(self.objects)

    def __iter__(self) -> Iterator[PlacedObject]:
        return iter(self.objects)

    def __contains__(self, instance_id: str) -> bool:
        return instance_id in self._index

    def __eq__(self, other) -> bool:
        if not isinstance(other, Layout):
            return NotImplemented
        return self.room == other.room and self.objects == other.objects and self.metadata == other.metadata

    def get(self, instance_id: str) -> PlacedObject:
        try:
            return self.objects[self._index[instance_id]]
        except KeyError:
            raise KeyError(f"unknown instance_id {instance_id!r}") from None

    def index_of(self, instance_id: str) -> int:
        return self._index[instance_id]

    def copy(self) -> "Layout":
        return Layout(self.room, list(self.objects), dict(self.metadata))

    def set_pose(self, instance_id: str, pose: Pose) -> None:
        """In-place pose update; only call on a private copy."""
        i = self._index[instance_id]
        self.objects[i] = self.objects[i].with_pose(pose)

    def replace_object(self, obj: PlacedObject) -> None:
        self.objects[self._index[obj.instance_id]] = obj

    def append(self, obj: PlacedObject) -> None:
        if obj.instance_id in self._index:
            raise ValidationError(f"duplicate instance_id {obj.instance_id!r}")
        self.objects.append(obj)
        self._index[obj.instance_id] = len(self.objects) - 1

    def floor_objects(self) -> list[PlacedObject]:
        return [o for o in self.objects if o.on_floor]

    def desktop_objects(self) -> list[PlacedObject]:
        return [o for o in self.objects if not o.on_floor]

    def instances_of(self, asset_id: str) -> list[PlacedObject]:
        return [o for o in self.objects if o.asset_id == asset_id]

    def placed_asset_ids(self) -> set[str]:
        return {o.asset_id for o in self.objects}

    def surface_groups(self) -> dict[str, list[PlacedObject]]:
        groups: dict[str, list[PlacedObject]] = {}
        for o in self.objects:
            if not o.on_floor:
                groups.setdefault(o.initial_location, []).append(o)
        return groups

    def host_of(self, instance_id: str) -> PlacedObject:
        """The floor-level object carrying ``instance_id`` (itself when on the floor)."""
        obj = self.get(instance_id)
        return obj if obj.on_floor else self.get(obj.initial_location)


def items_on(layout: Layout, instance_id: str) -> list[PlacedObject]:
    """Objects resting on ``instance_id``, in layout order."""
    layout.get(instance_id)
    return [o for o in layout.objects if o.initial_location == instance_id]


def tabletop_height(parent: PlacedObject, parent_asset: AssetRecord) -> float:
    return parent.pose.z + parent_asset.bbox.height


def desktop_to_global(
    parent: PlacedObject, parent_asset: AssetRecord, u: float, v: float, yaw_local: float = 0.0
) -> Pose:
    """Map a tabletop-local pose to the global frame.

    The local frame has its origin at the front-left corner of the tabletop,
    x along the width (long side) and y along the depth (short side).
    """
    if not parent_asset.provides_surface:
        raise ValueError(f"{parent.instance_id} ({parent_asset.asset_id}) is not a surface")
    w, d = parent_asset.width, parent_asset.depth
    eps = 1e-9
    if not (-eps <= u <= w + eps and -eps <= v <= d + eps):
        raise ValueError(f"local point ({u}, {v}) outside tabletop {w} x {d}")
    rot = rotation_matrix(parent.pose.yaw)
    offset = rot @ np.array([u - w / 2.0, v - d / 2.0])
    return Pose(
        parent.pose.x + offset[0],
        parent.pose.y + offset[1],
        tabletop_height(parent, parent_asset),
        parent.pose.yaw + yaw_local,
    )


def global_to_desktop(parent: PlacedObject, parent_asset: AssetRecord, x: float, y: float) -> tuple[float, float]:
    """Inverse of :func:`desktop_to_global` for positions."""
    rot = rotation_matrix(parent.pose.yaw)
    local = rot.T @ np.array([x - parent.pose.x, y - parent.pose.y])
    return local[0] + parent_asset.width / 2.0, local[1] + parent_asset.depth / 2.0


def check_layout(layout: Layout, base: AssetBase | None = None) -> list[Issue]:
    """Structural checks; asset-dependent checks run only when ``base`` is given."""
    issues = []
    ids = set()
    for i, obj in enumerate(layout.objects):
        path = f"objects[{i}]"
        ids.add(obj.instance_id)
        loc = obj.initial_location
        if loc == obj.instance_id:
            issues.append(Issue(f"{path}.initial_location", "no_self_reference", f"{obj.instance_id} rests on itself"))
            continue
        if loc != FLOOR:
            if loc not in layout:
                issues.append(
                    Issue(f"{path}.initial_location", "dangling_reference", f"{obj.instance_id} references missing {loc!r}")
                )
                continue
            parent = layout.get(loc)
            if not parent.on_floor:
                issues.append(
                    Issue(f"{path}.initial_location", "single_level_nesting", f"{loc!r} is itself a desktop item")
                )
                continue
            if base is not None and parent.asset_id in base:
                parent_asset = base[parent.asset_id]
                if not parent_asset.provides_surface:
                    issues.append(
                        Issue(f"{path}.initial_location", "surface_required", f"{loc!r} does not provide a surface")
                    )
                elif abs(obj.pose.z - tabletop_height(parent, parent_asset)) > HEIGHT_TOL:
                    issues.append(
                        Issue(
                            f"{path}.position[2]",
                            "tabletop_height",
                            f"{obj.instance_id} z={obj.pose.z} but tabletop is at {tabletop_height(parent, parent_asset)}",
                        )
                    )
        if base is not None and obj.asset_id not in base:
            issues.append(Issue(f"{path}.asset_id", "known_asset", f"unknown asset {obj.asset_id!r}"))
    return issues


def layout_to_dict(layout: Layout) -> dict:
    return {
        "room": layout.room.to_dict(),
        "objects": [
            {
                "instance_id": o.instance_id,
                "asset_id": o.asset_id,
                "position": [o.pose.x, o.pose.y, o.pose.z],
                "yaw_deg": o.pose.yaw,
                "initial_location": o.initial_location,
            }
            for o in layout.objects
        ],
        "metadata": dict(layout.metadata),
    }


def layout_from_dict(data: Mapping, base: AssetBase | None = None) -> Layout:
    try:
        room = Room.from_dict(data["room"])
        objects = []
        for entry in data.get("objects", []):
            x, y, z = (float(v) for v in entry["position"])
            objects.append(
                PlacedObject(
                    str(entry["instance_id"]),
                    str(entry["asset_id"]),
                    Pose(x, y, z, float(entry.get("yaw_deg", 0.0))),
                    str(entry.get("initial_location", FLOOR)),
                )
            )
    except (KeyError, TypeError, ValueError) as exc:
        raise ValidationError(f"malformed layout: {exc}") from exc
    layout = Layout(room, objects, {str(k): v for k, v in dict(data.get("metadata", {})).items()})
    problems = errors_only(check_layout(layout, base))
    if problems:
        raise ValidationError("invalid layout", problems)
    return layout


def layout_to_json(layout: Layout) -> str:
    # repr-based float output keeps 17 significant digits and is byte-stable
    return json.dumps(layout_to_dict(layout), indent=2) + "\n"


def load_layout(path: str | Path, base: AssetBase | None = None) -> Layout:
    try:
        data = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ValidationError(f"{path}: JSON parse error: {exc}") from exc
    return layout_from_dict(data, base)


def save_layout(layout: Layout, path: str | Path) -> None:
    Path(path).write_text(layout_to_json(layout), encoding="utf-8")


def build_layout(room: Room, objects: Iterable[PlacedObject], **metadata) -> Layout:
    return Layout(room, list(objects), dict(metadata))
