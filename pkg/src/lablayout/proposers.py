"""Proposer implementations: the deterministic heuristic and the remote HTTP client.

Proposers never edit a layout. They return commands or placements, which the
optimizer validates and applies itself.
"""

from __future__ import annotations

import json
import logging
import math
import os
import time
import urllib.error
import urllib.request
from dataclasses import dataclass
from importlib import resources
from string import Template
from typing import Mapping, Sequence

import numpy as np

from .assets import AssetBase, AssetRecord
from .commands import AdjustCommand, Move, Rotate, apply_command, commands_from_list
from .errors import LabLayoutError, PlacementInfeasible, ProposerUnavailable, ResponseRejected
from .geometry import footprint, make_footprint, overlap, room_footprint
from .navigation import approach_distance, approach_offset, inflated_mask, target_for_object
from .optimizer import (
    Proposer,
    ProposerRequest,
    ProposerResponse,
    RewardWeights,
    _free_spot,
    assess,
    better,
    count_violations,
)
from .protocol import Protocol
from .safety import FLAM, GLASS, INCOMP, SafetyConfig, evaluate_constraints, is_storage
from .scene import FLOOR, Layout, PlacedObject, Pose, Room, desktop_to_global, tabletop_height

logger = logging.getLogger(__name__)

WALL_YAWS = (("back", 0.0), ("left", 270.0), ("right", 90.0), ("front", 180.0))
CARDINAL_YAWS = (0.0, 90.0, 180.0, 270.0)


# -- placements -----------------------------------------------------------------


@dataclass(frozen=True)
class Placement:
    asset_id: str
    instance_id: str
    x: float
    y: float
    yaw: float = 0.0
    initial_location: str = FLOOR

    def to_dict(self) -> dict:
        return {
            "asset_id": self.asset_id,
            "instance_id": self.instance_id,
            "position": [self.x, self.y],
            "yaw_deg": self.yaw,
            "initial_location": self.initial_location,
        }


def placement_from_dict(data, layout: Layout | None = None, base: AssetBase | None = None) -> Placement:
    """Parse one placement; ``local_position`` is tabletop-local and needs the layout and base."""
    if not isinstance(data, Mapping):
        raise ResponseRejected(f"placement must be an object, got {data!r}", data)
    unknown = set(data) - {"asset_id", "instance_id", "position", "local_position", "yaw_deg", "initial_location"}
    if unknown:
        raise ResponseRejected(f"placement has unknown fields {sorted(unknown)}", data)
    try:
        asset_id = str(data["asset_id"])
        loc = str(data.get("initial_location", FLOOR))
        yaw = float(data.get("yaw_deg", 0.0))
        if "position" in data:
            x, y = (float(v) for v in data["position"][:2])
        else:
            u, v = (float(a) for a in data["local_position"])
            if layout is None or base is None or loc not in layout:
                raise ResponseRejected("local_position needs a placed surface as initial_location", data)
            parent = layout.get(loc)
            pose = desktop_to_global(parent, base[parent.asset_id], u, v, yaw)
            x, y, yaw = pose.x, pose.y, pose.yaw
    except (KeyError, TypeError, ValueError) as exc:
        raise ResponseRejected(f"malformed placement: {exc}", data) from None
    if not all(math.isfinite(a) for a in (x, y, yaw)):
        raise ResponseRejected("placement values must be finite", data)
    return Placement(asset_id, str(data.get("instance_id", "")), x, y, yaw, loc)


def apply_placements(layout: Layout, placements: Sequence[Placement], base: AssetBase) -> Layout:
    out = layout.copy()
    counts: dict[str, int] = {}
    for o in layout.objects:
        counts[o.asset_id] = counts.get(o.asset_id, 0) + 1
    for p in placements:
        if p.asset_id not in base:
            raise ResponseRejected(f"placement references unknown asset {p.asset_id!r}")
        iid = p.instance_id
        if not iid:
            counts[p.asset_id] = counts.get(p.asset_id, 0) + 1
            iid = f"{p.asset_id}_{counts[p.asset_id]}"
        z = 0.0
        if p.initial_location != FLOOR:
            if p.initial_location not in out:
                raise ResponseRejected(f"placement on missing surface {p.initial_location!r}")
            parent = out.get(p.initial_location)
            if not base[parent.asset_id].provides_surface:
                raise ResponseRejected(f"{p.initial_location!r} does not provide a surface")
            z = tabletop_height(parent, base[parent.asset_id])
        out.append(PlacedObject(iid, p.asset_id, Pose(p.x, p.y, z, p.yaw), p.initial_location))
    return out


# -- heuristic proposer ---------------------------------------------------------------


def interior_facing_yaw(center, room: Room) -> float:
    """Cardinal yaw whose approach side points most toward the room center."""
    to_center = room.center - np.asarray(center, dtype=float)
    best, best_dot = 0.0, -math.inf
    for yaw in CARDINAL_YAWS:
        d = np.array(approach_offset(1.0, yaw))
        dot = float(d @ to_center)
        if dot > best_dot + 1e-12:
            best, best_dot = yaw, dot
    return best


def room_assets_for(protocol: Protocol, base: AssetBase) -> list[AssetRecord]:
    """Room-level assets a protocol needs: step locations and any room assets it lists."""
    out: dict[str, AssetRecord] = {}
    names = [s.location for s in protocol.steps] + [a for s in protocol.steps for a in s.assets_used]
    names += list(protocol.instruments)
    for name in names:
        rec = base.try_resolve(name)
        if rec is not None and rec.asset_type == "room_asset":
            out.setdefault(rec.asset_id, rec)
    if protocol.reagents:
        storage = [r for r in base if r.asset_type == "room_asset" and r.provides_surface and is_storage(r, SafetyConfig())]
        if storage and not any(is_storage(r, SafetyConfig()) for r in out.values()):
            out.setdefault(storage[0].asset_id, storage[0])
    return list(out.values())


def desktop_items_for(protocol: Protocol, base: AssetBase) -> list[str]:
    """Non-room protocol assets ordered by first use in the steps."""
    order: dict[str, None] = {}
    for step in protocol.steps:
        for name in step.assets_used:
            rec = base.try_resolve(name)
            if rec is not None and rec.asset_type != "room_asset":
                order.setdefault(rec.asset_id)
    for name in (*protocol.instruments, *protocol.reagents):
        rec = base.try_resolve(name)
        if rec is not None and rec.asset_type != "room_asset":
            order.setdefault(rec.asset_id)
    return list(order)


class HeuristicProposer(Proposer):
    """Deterministic offline proposer; output depends only on the request and its seed."""

    name = "heuristic"

    def __init__(
        self,
        base: AssetBase,
        safety: SafetyConfig = SafetyConfig(),
        weights: RewardWeights = RewardWeights(),
        margin: float = 0.02,
        agent_radius: float = 0.3,
        offset_radius: float = 0.3,
        wall_gap: float = 0.1,
        edge_margin: float = 0.1,
        item_gap: float = 0.05,
        random_tries: int = 4,
    ):
        self.base = base
        self.safety = safety
        self.weights = weights
        self.margin = margin
        self.agent_radius = agent_radius
        self.offset_radius = offset_radius
        self.wall_gap = wall_gap
        self.edge_margin = edge_margin
        self.item_gap = item_gap
        self.random_tries = random_tries

    def propose(self, request: ProposerRequest) -> ProposerResponse:
        if request.mode == "adjust":
            return ProposerResponse(commands=self.adjust(request))
        if request.mode == "init_room":
            return ProposerResponse(placements=self.init_room(request))
        if request.mode == "init_desktop":
            return ProposerResponse(placements=self.init_desktop(request))
        raise ValueError(f"unknown proposer mode {request.mode!r}")

    # adjust -------------------------------------------------------------

    def _mover(self, layout: Layout, instance_id: str, level: str) -> PlacedObject | None:
        obj = layout.get(instance_id)
        if level == "room":
            return layout.host_of(instance_id)
        return None if obj.on_floor else obj

    def _separation_moves(self, layout: Layout, inst, level: str) -> list[list[AdjustCommand]]:
        a, b = (layout.get(s) for s in inst.subjects)
        out = []
        pairs = [(a, b), (b, a)]
        pairs.sort(key=lambda p: (self.base[p[0].asset_id].footprint_area, p[0].instance_id))
        need = inst.d_min + self.margin
        for subject, other in pairs:
            mover = self._mover(layout, subject.instance_id, level)
            if mover is None or mover.instance_id == self._host_id(layout, other.instance_id, level):
                continue
            w = subject.pose.xy - other.pose.xy
            norm = float(np.hypot(*w))
            base_dir = w / norm if norm > 1e-9 else np.array([1.0, 0.0])
            for turn in (0.0, 45.0, -45.0, 90.0, -90.0):
                c, s = math.cos(math.radians(turn)), math.sin(math.radians(turn))
                u = np.array([c * base_dir[0] - s * base_dir[1], s * base_dir[0] + c * base_dir[1]])
                wu = float(w @ u)
                disc = wu * wu - float(w @ w) + need * need
                if disc < 0:
                    continue
                t = -wu + math.sqrt(disc)
                if t <= 0:
                    continue
                out.append([Move(mover.instance_id, mover.pose.x + t * u[0], mover.pose.y + t * u[1])])
        return out

    @staticmethod
    def _host_id(layout: Layout, instance_id: str, level: str) -> str:
        return layout.host_of(instance_id).instance_id if level == "room" else instance_id

    def _glass_move(self, layout: Layout, inst) -> list[list[AdjustCommand]]:
        item = layout.get(inst.subjects[0])
        parent = layout.get(item.initial_location)
        pa = self.base[parent.asset_id]
        top = footprint(parent, pa)
        local = top.to_local(footprint(item, self.base[item.asset_id]).corners)
        half = (local.max(axis=0) - local.min(axis=0)) / 2
        center_local = top.to_local(item.pose.xy)
        room = top.half_extents - half - inst.d_min - self.margin
        if np.any(room < 0):
            room = np.maximum(top.half_extents - half, 0.0)
        target = np.clip(center_local, -room, room)
        world = top.center + top.rotation @ target
        return [[Move(item.instance_id, float(world[0]), float(world[1]))]]

    def _wall_rotations(self, layout: Layout, protocol: Protocol | None) -> list[list[AdjustCommand]]:
        xmin, ymin, xmax, ymax = layout.room.interior
        r = self.agent_radius
        out = []
        for obj in layout.floor_objects():
            t = target_for_object(obj, layout, self.base, self.offset_radius)
            if xmin + r <= t.x <= xmax - r and ymin + r <= t.y <= ymax - r:
                continue
            yaw = interior_facing_yaw(obj.pose.xy, layout.room)
            if abs(yaw - obj.pose.yaw) > 1e-9:
                out.append([Rotate(obj.instance_id, yaw)])
        return out

    def _random_moves(self, layout: Layout, ids: Sequence[str], request: ProposerRequest) -> list[list[AdjustCommand]]:
        rng = np.random.default_rng([int(request.seed), int(request.attempt)])
        out = []
        for iid in ids:
            obj = layout.get(iid)
            if obj.on_floor:
                xmin, ymin, xmax, ymax = layout.room.interior
                lo, hi = np.array([xmin, ymin]), np.array([xmax, ymax])
            else:
                parent = layout.get(obj.initial_location)
                top = footprint(parent, self.base[parent.asset_id])
                lo, hi = top.corners.min(axis=0), top.corners.max(axis=0)
            for _ in range(self.random_tries):
                p = lo + rng.random(2) * (hi - lo)
                out.append([Move(iid, float(p[0]), float(p[1]))])
        return out

    def candidates(self, request: ProposerRequest) -> list[list[AdjustCommand]]:
        layout, level = request.layout, request.level
        instances = evaluate_constraints(layout, request.protocol, self.base, self.safety)
        weak = sorted(
            (i for i in instances if i.score is not None and i.score < 1.0),
            key=lambda i: (i.score, i.kind, i.subjects),
        )
        cands: list[list[AdjustCommand]] = []
        worst_ids: list[str] = []
        for inst in weak[:3]:
            if inst.kind in (FLAM, INCOMP):
                cands.extend(self._separation_moves(layout, inst, level))
                for s in inst.subjects:
                    m = self._mover(layout, s, level)
                    if m is not None and m.instance_id not in worst_ids:
                        worst_ids.append(m.instance_id)
            elif inst.kind == GLASS and level == "desktop":
                cands.extend(self._glass_move(layout, inst))
        v = request.violations or count_violations(layout, request.protocol, self.base, self.safety)
        for id_a, id_b, _ in v.collision:
            obj = layout.get(id_b)
            if (level == "room") == obj.on_floor:
                delta = _free_spot(layout, obj, self.base, 0.05 if obj.on_floor else 0.01)
                if delta is not None:
                    cands.append([Move(id_b, obj.pose.x + float(delta[0]), obj.pose.y + float(delta[1]))])
        if level == "room":
            cands.extend(self._wall_rotations(layout, request.protocol))
        cands.extend(self._random_moves(layout, worst_ids[:2], request))
        return cands

    def adjust(self, request: ProposerRequest) -> list[AdjustCommand]:
        """Screen every candidate edit and return the best strictly improving one."""
        layout = request.layout
        cur = assess(layout, request.protocol, self.base, self.weights, self.safety)
        best, best_cmds = cur, []
        for cmds in self.candidates(request):
            try:
                cand_layout = layout
                for c in cmds:
                    cand_layout = apply_command(cand_layout, c, self.base)
            except (ValueError, LabLayoutError):
                continue
            cand = assess(cand_layout, request.protocol, self.base, self.weights, self.safety)
            if better(cand, best):
                best, best_cmds = cand, cmds
        return list(best_cmds)

    # init_room ----------------------------------------------------------

    def _room_order(self, records: list[AssetRecord], protocol: Protocol | None) -> list[AssetRecord]:
        volatile = protocol is not None and any(
            (r := self.base.try_resolve(n)) is not None and r.safety.volatile_or_toxic for n in protocol.reagents
        )

        def key(rec: AssetRecord):
            hood_first = volatile and rec.category == "safety_equipment" and rec.subtype == "ventilation"
            return (0 if hood_first else 1, -rec.footprint_area, rec.asset_id)

        return sorted(records, key=key)

    def _wall_slots(self, room: Room, rec: AssetRecord):
        """Candidate (x, y, yaw) poses along each wall, scanning from one corner."""
        xmin, ymin, xmax, ymax = room.interior
        g, step = self.wall_gap, 0.05
        L, S = rec.bbox.long_side, rec.bbox.short_side
        for wall, yaw in WALL_YAWS:
            if wall in ("back", "front"):
                y = ymax - g - S / 2 if wall == "back" else ymin + g + S / 2
                for x in np.arange(xmin + g + L / 2, xmax - g - L / 2 + 1e-9, step):
                    yield float(x), float(y), yaw
            else:
                x = xmin + g + S / 2 if wall == "left" else xmax - g - S / 2
                for y in np.arange(ymax - g - L / 2, ymin + g + L / 2 - 1e-9, -step):
                    yield float(x), float(y), yaw

    def _slot_ok(self, room: Room, placed: list[tuple], rec: AssetRecord, x, y, yaw) -> bool:
        fp = make_footprint((x, y), rec.bbox.long_side, rec.bbox.short_side, yaw)
        if not room_footprint(room).contains(fp.corners, 1e-9).all():
            return False
        dist = approach_distance(rec.bbox.short_side, self.offset_radius)
        dx, dy = approach_offset(dist, yaw)
        target = np.array([x + dx, y + dy])
        xmin, ymin, xmax, ymax = room.interior
        r = self.agent_radius
        if not (xmin + r < target[0] < xmax - r and ymin + r < target[1] < ymax - r):
            return False
        grown = make_footprint((x, y), rec.bbox.long_side + 2 * self.wall_gap, rec.bbox.short_side + 2 * self.wall_gap, yaw)
        for other_fp, other_target in placed:
            if overlap(other_fp, grown).overlapping:
                return False
            if inflated_mask(other_fp, target[None, :], r)[0] or inflated_mask(fp, other_target[None, :], r)[0]:
                return False
        return True

    def init_room(self, request: ProposerRequest) -> list[Placement]:
        room_data = dict(request.room or {})
        room = Room.from_dict(room_data) if "width" in room_data else request.layout.room
        if "assets" in room_data:
            records = [self.base.resolve(a) for a in room_data["assets"]]
        else:
            records = room_assets_for(request.protocol, self.base)
        placed: list[tuple] = []
        out, overflow = [], []
        counts: dict[str, int] = {}
        for rec in self._room_order(records, request.protocol):
            for x, y, yaw in self._wall_slots(room, rec):
                if self._slot_ok(room, placed, rec, x, y, yaw):
                    fp = make_footprint((x, y), rec.bbox.long_side, rec.bbox.short_side, yaw)
                    dx, dy = approach_offset(approach_distance(rec.bbox.short_side, self.offset_radius), yaw)
                    placed.append((fp, np.array([x + dx, y + dy])))
                    counts[rec.asset_id] = counts.get(rec.asset_id, 0) + 1
                    out.append(Placement(rec.asset_id, f"{rec.asset_id}_{counts[rec.asset_id]}", x, y, yaw))
                    break
            else:
                overflow.append(rec.asset_id)
        if overflow:
            raise PlacementInfeasible("no wall slot left", overflow)
        return out

    # init_desktop -------------------------------------------------------

    def _surface_for(self, layout: Layout, protocol: Protocol, rec: AssetRecord) -> list[str]:
        """Preferred surfaces for an item, best first; every surface appears once."""
        surfaces = [o for o in layout.floor_objects() if self.base[o.asset_id].provides_surface]
        prefs: list[str] = []

        def add(pred):
            for o in surfaces:
                if pred(self.base[o.asset_id]) and o.instance_id not in prefs:
                    prefs.append(o.instance_id)

        if rec.is_reagent and rec.safety.volatile_or_toxic:
            add(lambda a: a.subtype == "ventilation")
        if rec.is_reagent:
            add(lambda a: is_storage(a, self.safety))
        for step in protocol.steps:
            if rec.asset_id in {getattr(self.base.try_resolve(n), "asset_id", None) for n in step.assets_used}:
                loc = self.base.try_resolve(step.location)
                if loc is not None:
                    add(lambda a, loc=loc: a.asset_id == loc.asset_id)
                break
        add(lambda a: not is_storage(a, self.safety))
        add(lambda a: True)
        return prefs

    def init_desktop(self, request: ProposerRequest) -> list[Placement]:
        layout, protocol = request.layout, request.protocol
        shelves: dict[str, list] = {}  # surface id -> [cursor_u, row_v, row_depth]
        out, overflow = [], []
        placed_ids = layout.placed_asset_ids()
        for asset_id in desktop_items_for(protocol, self.base):
            if asset_id in placed_ids:
                continue
            rec = self.base[asset_id]
            for sid in self._surface_for(layout, protocol, rec):
                slot = self._pack(layout, sid, rec, shelves)
                if slot is not None:
                    out.append(Placement(asset_id, f"{asset_id}_1", slot[0], slot[1], slot[2], sid))
                    break
            else:
                overflow.append(asset_id)
        if overflow:
            raise PlacementInfeasible("surfaces too small", overflow)
        return out

    def _pack(self, layout: Layout, sid: str, rec: AssetRecord, shelves: dict):
        """Left-to-right shelf packing in the surface frame; returns a global (x, y, yaw)."""
        parent = layout.get(sid)
        pa = self.base[parent.asset_id]
        m, gap = self.edge_margin, self.item_gap
        w, d = rec.bbox.long_side, rec.bbox.short_side
        cursor = shelves.setdefault(sid, [m, m, 0.0])
        u, v, row = cursor
        if u + w > pa.width - m + 1e-12:
            u, v, row = m, v + row + gap, 0.0
        if u + w > pa.width - m + 1e-12 or v + d > pa.depth - m + 1e-12:
            return None
        shelves[sid] = [u + w + gap, v, max(row, d)]
        pose = desktop_to_global(parent, pa, u + w / 2, v + d / 2, 0.0)
        return pose.x, pose.y, pose.yaw


# -- remote proposer -----------------------------------------------------------------


def load_prompt(mode: str) -> Template:
    text = resources.files("lablayout").joinpath("prompts", f"{mode}.txt").read_text(encoding="utf-8")
    return Template(text)


def render_prompt(request: ProposerRequest, base: AssetBase | None = None) -> str:
    payload = request.to_dict(base)
    fields = {k: json.dumps(payload.get(k), sort_keys=True) for k in ("room", "layout", "violations", "protocol", "catalog")}
    fields["level"] = request.level
    return load_prompt(request.mode).safe_substitute(fields)


def parse_response(payload, mode: str, layout: Layout | None = None, base: AssetBase | None = None) -> ProposerResponse:
    """Strict schema check: anything unexpected rejects the whole response."""
    if not isinstance(payload, Mapping):
        raise ResponseRejected("response must be a JSON object", payload)
    if mode == "adjust":
        if set(payload) - {"commands"} or "commands" not in payload:
            raise ResponseRejected("adjust response must contain only 'commands'", payload)
        try:
            return ProposerResponse(commands=commands_from_list(payload["commands"]))
        except ResponseRejected as exc:
            raise ResponseRejected(str(exc), payload) from None
    if set(payload) - {"placements"} or not isinstance(payload.get("placements"), list):
        raise ResponseRejected("init response must contain only a 'placements' list", payload)
    return ProposerResponse(placements=[placement_from_dict(p, layout, base) for p in payload["placements"]])


@dataclass(frozen=True)
class EndpointConfig:
    endpoint_url: str = ""
    timeout_s: float = 60.0
    max_retries: int = 2
    auth_env_var: str = "LABLAYOUT_PROPOSER_TOKEN"
    backoff_s: float = 0.5
    model: str = ""


class RemoteProposer(Proposer):
    """JSON-over-HTTP proposer. The bearer token is read from the environment on each call."""

    name = "remote"

    def __init__(self, config: EndpointConfig, base: AssetBase | None = None, sleep=time.sleep):
        if not config.endpoint_url:
            raise ValueError("remote proposer needs an endpoint_url")
        self.config = config
        self.base = base
        self._sleep = sleep

    def _post(self, body: bytes) -> bytes:
        headers = {"Content-Type": "application/json"}
        token = os.environ.get(self.config.auth_env_var, "")
        if token:
            headers["Authorization"] = f"Bearer {token}"
        req = urllib.request.Request(self.config.endpoint_url, data=body, headers=headers, method="POST")
        with urllib.request.urlopen(req, timeout=self.config.timeout_s) as resp:
            return resp.read()

    def propose(self, request: ProposerRequest) -> ProposerResponse:
        message = {"mode": request.mode, "prompt": render_prompt(request, self.base), "request": request.to_dict(self.base)}
        if self.config.model:
            message["model"] = self.config.model
        body = json.dumps(message, sort_keys=True).encode("utf-8")
        last = None
        for attempt in range(self.config.max_retries + 1):
            try:
                raw = self._post(body)
                break
            except (urllib.error.URLError, TimeoutError, ConnectionError, OSError) as exc:
                last = exc
                logger.warning("proposer call %d failed: %s", attempt + 1, exc)
                if attempt < self.config.max_retries:
                    self._sleep(self.config.backoff_s * 2**attempt)
        else:
            raise ProposerUnavailable(f"{self.config.endpoint_url} unreachable after {self.config.max_retries + 1} tries: {last}")
        try:
            payload = json.loads(raw.decode("utf-8"))
        except (UnicodeDecodeError, json.JSONDecodeError) as exc:
            logger.error("rejected non-JSON proposer payload: %r", raw[:500])
            raise ResponseRejected(f"response is not JSON: {exc}", raw) from None
        try:
            return parse_response(payload, request.mode, request.layout, self.base)
        except ResponseRejected as exc:
            logger.error("rejected proposer payload: %s", json.dumps(payload)[:2000])
            raise exc


# -- scene generation ---------------------------------------------------------------------


def generate_layout(
    protocol: Protocol,
    base: AssetBase,
    room: Room,
    proposer: Proposer | None = None,
    seed: int = 0,
    **metadata,
) -> Layout:
    """Hierarchical initialization: room-level placement, then desktop packing."""
    proposer = proposer or HeuristicProposer(base)
    layout = Layout(room, [], {"protocol_id": protocol.protocol_id, **metadata})
    req = ProposerRequest("init_room", layout, protocol, "room", seed=seed, room=room.to_dict())
    layout = apply_placements(layout, proposer.propose(req).placements, base)
    req = ProposerRequest("init_desktop", layout, protocol, "desktop", seed=seed)
    return apply_placements(layout, proposer.propose(req).placements, base)

