"""Layout edit commands (move, rotate, swap) and the rigid updates behind them.

Every update keeps desktop items attached: when a surface moves or turns,
the items on it follow rigidly.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Mapping, Sequence, Union

import numpy as np

from .assets import AssetBase
from .errors import NotFoundError, ResponseRejected
from .scene import FLOOR, Layout, Pose, items_on, rotation_matrix, tabletop_height, wrap_degrees


@dataclass(frozen=True)
class Move:
    instance_id: str
    x: float
    y: float

    def to_dict(self) -> dict:
        return {"move": {"id": self.instance_id, "pos": [self.x, self.y]}}


@dataclass(frozen=True)
class Rotate:
    instance_id: str
    angle: float  # absolute target yaw, degrees

    def to_dict(self) -> dict:
        return {"rotate": {"id": self.instance_id, "angle": self.angle}}


@dataclass(frozen=True)
class Swap:
    id_a: str
    id_b: str

    def to_dict(self) -> dict:
        return {"swap": {"ids": [self.id_a, self.id_b]}}


AdjustCommand = Union[Move, Rotate, Swap]
COMMAND_NAMES = ("move", "rotate", "swap")


def _number(value, what: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)) or not np.isfinite(value):
        raise ResponseRejected(f"{what} must be a finite number, got {value!r}")
    return float(value)


def command_from_dict(data) -> AdjustCommand:
    """Parse one command object; anything outside the closed vocabulary is rejected."""
    if not isinstance(data, Mapping) or len(data) != 1:
        raise ResponseRejected(f"a command must be a single-key object, got {data!r}", data)
    (name, body), = data.items()
    if name not in COMMAND_NAMES:
        raise ResponseRejected(f"unknown command {name!r}", data)
    if not isinstance(body, Mapping):
        raise ResponseRejected(f"{name} body must be an object", data)
    try:
        if name == "move":
            pos = body["pos"]
            if not isinstance(pos, Sequence) or len(pos) != 2:
                raise ResponseRejected("move.pos must be [x, y]", data)
            return Move(str(body["id"]), _number(pos[0], "move.pos[0]"), _number(pos[1], "move.pos[1]"))
        if name == "rotate":
            return Rotate(str(body["id"]), _number(body["angle"], "rotate.angle"))
        ids = body["ids"]
        if not isinstance(ids, Sequence) or isinstance(ids, str) or len(ids) != 2:
            raise ResponseRejected("swap.ids must list two ids", data)
        return Swap(str(ids[0]), str(ids[1]))
    except KeyError as exc:
        raise ResponseRejected(f"{name} is missing field {exc}", data) from None


def commands_from_list(items) -> list[AdjustCommand]:
    if not isinstance(items, list):
        raise ResponseRejected("commands must be a list", items)
    return [command_from_dict(c) for c in items]


def commands_to_list(commands: Sequence[AdjustCommand]) -> list[dict]:
    return [c.to_dict() for c in commands]


def _require(layout: Layout, instance_id: str):
    if instance_id not in layout:
        raise NotFoundError(f"unknown instance_id {instance_id!r}")
    return layout.get(instance_id)


def apply_translation(layout: Layout, instance_id: str, dx: float, dy: float = 0.0) -> Layout:
    """Shift an object and everything resting on it by (dx, dy)."""
    obj = _require(layout, instance_id)
    out = layout.copy()
    if dx == 0 and dy == 0:
        return out
    out.set_pose(instance_id, obj.pose.translated(dx, dy))
    for item in items_on(layout, instance_id):
        out.set_pose(item.instance_id, item.pose.translated(dx, dy))
    return out


def translate_axis(layout: Layout, instance_id: str, axis: str, delta: float) -> Layout:
    if axis not in ("x", "y"):
        raise ValueError(f"axis must be 'x' or 'y', got {axis!r}")
    return apply_translation(layout, instance_id, delta if axis == "x" else 0.0, delta if axis == "y" else 0.0)


def rotate_by(layout: Layout, instance_id: str, delta_deg: float) -> Layout:
    """Turn an object about its center; attached items orbit rigidly and turn with it."""
    obj = _require(layout, instance_id)
    out = layout.copy()
    c = obj.pose.xy
    rot = rotation_matrix(delta_deg)
    out.set_pose(instance_id, replace(obj.pose, yaw=obj.pose.yaw + delta_deg))
    for item in items_on(layout, instance_id):
        p = c + rot @ (item.pose.xy - c)
        out.set_pose(item.instance_id, Pose(p[0], p[1], item.pose.z, item.pose.yaw + delta_deg))
    return out


def yaw_delta(current: float, target: float) -> float:
    """Signed shortest turn from ``current`` to ``target`` in (-180, 180]."""
    d = wrap_degrees(target - current)
    return d - 360.0 if d > 180.0 else d


def apply_rotation(layout: Layout, instance_id: str, target_yaw: float) -> Layout:
    obj = _require(layout, instance_id)
    return rotate_by(layout, instance_id, yaw_delta(obj.pose.yaw, target_yaw))


def apply_move(layout: Layout, instance_id: str, x: float, y: float) -> Layout:
    obj = _require(layout, instance_id)
    return apply_translation(layout, instance_id, x - obj.pose.x, y - obj.pose.y)


def apply_swap(layout: Layout, id_a: str, id_b: str, base: AssetBase) -> Layout:
    """Exchange two same-level objects' placements; attached items are carried along."""
    a, b = _require(layout, id_a), _require(layout, id_b)
    if id_a == id_b:
        return layout.copy()
    if a.on_floor != b.on_floor:
        raise ValueError(f"cannot swap floor object with desktop item ({id_a}, {id_b})")
    out = layout.copy()
    if not a.on_floor:
        for me, other in ((a, b), (b, a)):
            parent = layout.get(other.initial_location)
            z = tabletop_height(parent, base[parent.asset_id])
            out.replace_object(
                replace(
                    me,
                    pose=Pose(other.pose.x, other.pose.y, z, other.pose.yaw),
                    initial_location=other.initial_location,
                )
            )
        return out
    for me, other in ((a, b), (b, a)):
        new_pose = Pose(other.pose.x, other.pose.y, me.pose.z, other.pose.yaw)
        out.set_pose(me.instance_id, new_pose)
        rot = rotation_matrix(new_pose.yaw - me.pose.yaw)
        top = new_pose.z + base[me.asset_id].bbox.height
        for item in items_on(layout, me.instance_id):
            p = new_pose.xy + rot @ (item.pose.xy - me.pose.xy)
            out.set_pose(item.instance_id, Pose(p[0], p[1], top, item.pose.yaw + new_pose.yaw - me.pose.yaw))
    return out


def apply_command(layout: Layout, command: AdjustCommand, base: AssetBase) -> Layout:
    if isinstance(command, Move):
        return apply_move(layout, command.instance_id, command.x, command.y)
    if isinstance(command, Rotate):
        return apply_rotation(layout, command.instance_id, command.angle)
    if isinstance(command, Swap):
        return apply_swap(layout, command.id_a, command.id_b, base)
    raise TypeError(f"not a command: {command!r}")


def sync_heights(layout: Layout, base: AssetBase) -> Layout:
    """Snap every desktop item onto its surface height."""
    out = layout.copy()
    for obj in layout.objects:
        if obj.initial_location != FLOOR and obj.initial_location in layout:
            parent = layout.get(obj.initial_location)
            z = tabletop_height(parent, base[parent.asset_id])
            if obj.pose.z != z:
                out.set_pose(obj.instance_id, replace(obj.pose, z=z))
    return out
