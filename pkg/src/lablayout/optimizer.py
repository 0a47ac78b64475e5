"""Violation counting, the layout reward, FastRepair and the propose/validate/accept loop."""

from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .assets import AssetBase
from .commands import AdjustCommand, apply_command, apply_translation, commands_to_list, sync_heights
from .errors import LabLayoutError, UnrepairableError
from .geometry import (
    PenetrationResult,
    bounds_correction,
    container_of,
    containment_correction,
    footprint,
    overlap,
    pairwise_collisions,
    separation_candidates,
    tested_pair_count,
)
from .protocol import Protocol
from .safety import ChemReport, ConstraintInstance, SafetyConfig, aggregate, critical_instances, evaluate_constraints
from .scene import Layout, PlacedObject, layout_to_dict

logger = logging.getLogger(__name__)

LEVELS = ("room", "desktop")
F_TOL = 1e-12


@dataclass(frozen=True)
class RewardWeights:
    w_geo: float = 0.5
    w_chem: float = 0.5

    def __post_init__(self):
        if self.w_geo < 0 or self.w_chem < 0 or self.w_geo + self.w_chem <= 0:
            raise ValueError("reward weights must be non-negative and not both zero")
        total = self.w_geo + self.w_chem
        object.__setattr__(self, "w_geo", self.w_geo / total)
        object.__setattr__(self, "w_chem", self.w_chem / total)


@dataclass(frozen=True)
class OptimizerConfig:
    weights: RewardWeights = RewardWeights()
    margin: float = 0.02
    repair_rounds: int = 50
    plateau: int = 3
    room_iterations: int = 20
    desktop_iterations: int = 20
    seed: int = 0

    def iterations(self, level: str) -> int:
        return self.room_iterations if level == "room" else self.desktop_iterations


@dataclass
class ViolationReport:
    boundary: list[tuple[str, tuple[float, float]]] = field(default_factory=list)
    collision: list[tuple[str, str, PenetrationResult]] = field(default_factory=list)
    critical: list[ConstraintInstance] = field(default_factory=list)

    @property
    def v_geo(self) -> int:
        return len(self.boundary) + len(self.collision)

    @property
    def v(self) -> int:
        return self.v_geo + len(self.critical)

    def offenders(self) -> set[str]:
        bad = {b[0] for b in self.boundary}
        for a, b, _ in self.collision:
            bad.update((a, b))
        return bad

    def to_dict(self) -> dict:
        return {
            "v": self.v,
            "boundary": [{"id": i, "correction": list(c)} for i, c in self.boundary],
            "collision": [{"pair": [a, b], **p.to_dict()} for a, b, p in self.collision],
            "critical": [c.to_dict() for c in self.critical],
        }


def geometric_violations(layout: Layout, base: AssetBase) -> ViolationReport:
    rep = ViolationReport()
    for obj in layout.objects:
        try:
            corr = bounds_correction(layout, obj, base)
        except UnrepairableError:
            rep.boundary.append((obj.instance_id, (math.nan, math.nan)))
            continue
        if corr is not None:
            rep.boundary.append((obj.instance_id, (float(corr[0]), float(corr[1]))))
    rep.collision = pairwise_collisions(layout, base)
    return rep


@dataclass
class Assessment:
    violations: ViolationReport
    f_geo: float
    chem: ChemReport
    reward: float

    @property
    def v(self) -> int:
        return self.violations.v

    def key(self) -> tuple[int, float]:
        return (self.v, -self.reward)


def assess(
    layout: Layout,
    protocol: Protocol | None,
    base: AssetBase,
    weights: RewardWeights = RewardWeights(),
    safety: SafetyConfig = SafetyConfig(),
) -> Assessment:
    rep = geometric_violations(layout, base)
    instances = evaluate_constraints(layout, protocol, base, safety, rep.offenders())
    rep.critical = critical_instances(instances)
    n_checks = len(layout) + tested_pair_count(layout)
    f_geo = 1.0 - min(1.0, rep.v_geo / n_checks) if n_checks else 1.0
    chem = aggregate(instances)
    return Assessment(rep, f_geo, chem, weights.w_geo * f_geo + weights.w_chem * chem.f_chem)


def count_violations(
    layout: Layout, protocol: Protocol | None, base: AssetBase, safety: SafetyConfig = SafetyConfig()
) -> ViolationReport:
    return assess(layout, protocol, base, RewardWeights(), safety).violations


def reward(
    layout: Layout,
    protocol: Protocol | None,
    base: AssetBase,
    weights: RewardWeights = RewardWeights(),
    safety: SafetyConfig = SafetyConfig(),
) -> float:
    return assess(layout, protocol, base, weights, safety).reward


def better(candidate: Assessment, incumbent: Assessment) -> bool:
    """Fewer violations, or as many with a strictly higher reward."""
    if candidate.v != incumbent.v:
        return candidate.v < incumbent.v
    return candidate.reward > incumbent.reward + F_TOL


def accept(
    candidate: Layout,
    incumbent: Layout,
    protocol: Protocol | None,
    base: AssetBase,
    weights: RewardWeights = RewardWeights(),
    safety: SafetyConfig = SafetyConfig(),
) -> bool:
    return better(assess(candidate, protocol, base, weights, safety), assess(incumbent, protocol, base, weights, safety))


# -- FastRepair ---------------------------------------------------------------


@dataclass
class RepairOutcome:
    layout: Layout
    rounds: int
    converged: bool
    residual: ViolationReport


def _peers(layout: Layout, obj: PlacedObject) -> list[PlacedObject]:
    if obj.on_floor:
        return [o for o in layout.floor_objects() if o.instance_id != obj.instance_id]
    return [o for o in layout.objects if o.initial_location == obj.initial_location and o.instance_id != obj.instance_id]


def _fits(layout: Layout, obj: PlacedObject, base: AssetBase, fp=None) -> bool:
    fp = fp if fp is not None else footprint(obj, base[obj.asset_id])
    try:
        return containment_correction(fp, container_of(layout, obj, base)) is None
    except UnrepairableError:
        return False


def _clear(layout: Layout, obj: PlacedObject, base: AssetBase, fp) -> bool:
    return not any(overlap(footprint(p, base[p.asset_id]), fp).overlapping for p in _peers(layout, obj))


def _free_spot(layout: Layout, obj: PlacedObject, base: AssetBase, step: float) -> np.ndarray | None:
    """Nearest grid offset placing ``obj`` in bounds and clear of its peers."""
    fp = footprint(obj, base[obj.asset_id])
    container = container_of(layout, obj, base)
    reach = container.half_extents.max()
    lo, hi = container.center - reach, container.center + reach
    xs = np.arange(lo[0], hi[0] + step, step)
    ys = np.arange(lo[1], hi[1] + step, step)
    gx, gy = np.meshgrid(xs - fp.center[0], ys - fp.center[1])
    offsets = np.stack([gx.ravel(), gy.ravel()], axis=1)
    order = np.lexsort((offsets[:, 1], offsets[:, 0], np.round(np.hypot(offsets[:, 0], offsets[:, 1]), 9)))
    peers = [footprint(p, base[p.asset_id]) for p in _peers(layout, obj)]
    radius = float(np.hypot(*fp.half_extents))
    peer_r = [float(np.hypot(*p.half_extents)) for p in peers]
    for k in order:
        cand = fp.translated(offsets[k])
        if not _fits(layout, obj, base, cand):
            continue
        hit = False
        for p, r in zip(peers, peer_r):
            if np.hypot(*(p.center - cand.center)) >= r + radius:
                continue
            if overlap(p, cand).overlapping:
                hit = True
                break
        if not hit:
            return offsets[k]
    return None


def _repair_bounds(layout: Layout, base: AssetBase) -> Layout:
    for obj in list(layout.floor_objects()) + list(layout.desktop_objects()):
        obj = layout.get(obj.instance_id)
        corr = bounds_correction(layout, obj, base)
        if corr is not None:
            layout = apply_translation(layout, obj.instance_id, float(corr[0]), float(corr[1]))
    return layout


def _resolve_pair(layout: Layout, id_a: str, id_b: str, base: AssetBase, margin: float) -> Layout:
    a, b = layout.get(id_a), layout.get(id_b)
    fa, fb = footprint(a, base[a.asset_id]), footprint(b, base[b.asset_id])
    if not overlap(fa, fb).overlapping:
        return layout
    options = []  # (priority, distance, mover, delta)
    for rank, (mover, fixed_fp, mover_fp) in enumerate(((b, fa, fb), (a, fb, fa))):
        for dist, direction in separation_candidates(fixed_fp, mover_fp):
            options.append((rank, dist + margin, mover, direction * (dist + margin)))
    options.sort(key=lambda o: (o[0], o[1]))
    # first choice: a minimal push that leaves the mover in bounds and clear of everything else
    for rank, dist, mover, delta in options:
        cand = footprint(mover, base[mover.asset_id]).translated(delta)
        if _fits(layout, mover, base, cand) and _clear(layout, mover, base, cand):
            return apply_translation(layout, mover.instance_id, float(delta[0]), float(delta[1]))
    for rank, dist, mover, delta in sorted(options, key=lambda o: (o[1], o[0])):
        cand = footprint(mover, base[mover.asset_id]).translated(delta)
        if _fits(layout, mover, base, cand):
            return apply_translation(layout, mover.instance_id, float(delta[0]), float(delta[1]))
    _, _, mover, delta = options[0]
    return apply_translation(layout, mover.instance_id, float(delta[0]), float(delta[1]))


def _repair_collisions(layout: Layout, base: AssetBase, margin: float) -> Layout:
    for id_a, id_b, _ in pairwise_collisions(layout, base):
        layout = _resolve_pair(layout, id_a, id_b, base, margin)
    return layout


def _relocate_stuck(layout: Layout, base: AssetBase, margin: float) -> Layout:
    """Last resort: move the later object of each remaining collision to the nearest free spot."""
    for id_a, id_b, _ in pairwise_collisions(layout, base):
        a, b = layout.get(id_a), layout.get(id_b)
        if not overlap(footprint(a, base[a.asset_id]), footprint(b, base[b.asset_id])).overlapping:
            continue
        for mover in (b, a):
            step = max(margin, 0.05 if mover.on_floor else 0.01)
            delta = _free_spot(layout, mover, base, step)
            if delta is not None:
                layout = apply_translation(layout, mover.instance_id, float(delta[0]), float(delta[1]))
                break
    return layout


def fast_repair(layout: Layout, base: AssetBase, max_rounds: int = 50, margin: float = 0.02) -> RepairOutcome:
    """Rule-based boundary/collision repair with rigid workspace synchronization.

    Raises UnrepairableError when an object is larger than its container.
    """
    for obj in layout.objects:
        # surfaces first so oversize checks see the container they will have
        bounds_correction(layout, obj, base)
    current = sync_heights(layout, base)
    report = geometric_violations(current, base)
    rounds = 0
    stuck = 0
    while report.v_geo and rounds < max_rounds:
        rounds += 1
        before = report.v_geo
        current = _repair_bounds(current, base)
        current = _repair_collisions(current, base, margin)
        current = _repair_bounds(current, base)
        current = sync_heights(current, base)
        report = geometric_violations(current, base)
        stuck = stuck + 1 if report.v_geo >= before else 0
        if report.v_geo and stuck >= 2:
            current = _relocate_stuck(current, base, margin)
            report = geometric_violations(current, base)
            stuck = 0
    return RepairOutcome(current, rounds, report.v_geo == 0, report)


# -- command application and the optimization loop -----------------------------


def apply_commands(
    layout: Layout,
    commands: Sequence[AdjustCommand],
    protocol: Protocol | None,
    base: AssetBase,
    safety: SafetyConfig = SafetyConfig(),
) -> tuple[Layout, bool]:
    """Apply commands to a copy; reject wholesale if hard violations increase."""
    candidate = layout.copy()
    try:
        for cmd in commands:
            candidate = apply_command(candidate, cmd, base)
    except ValueError as exc:
        logger.info("command batch rejected: %s", exc)
        return layout, False
    v_in = count_violations(layout, protocol, base, safety).v
    v_out = count_violations(candidate, protocol, base, safety).v
    if v_out > v_in:
        return layout, False
    return candidate, True


@dataclass
class ProposerRequest:
    mode: str  # init_room | init_desktop | adjust
    layout: Layout | None
    protocol: Protocol | None
    level: str = "room"
    violations: ViolationReport | None = None
    attempt: int = 0
    seed: int = 0
    room: Mapping | None = None

    def to_dict(self, base: AssetBase | None = None) -> dict:
        out = {"mode": self.mode, "level": self.level, "attempt": self.attempt, "seed": self.seed}
        if self.layout is not None:
            data = layout_to_dict(self.layout)
            out["layout"] = {"room": data["room"], "objects": data["objects"]}
        if self.room is not None:
            out["room"] = dict(self.room)
        if self.violations is not None:
            out["violations"] = self.violations.to_dict()
        if self.protocol is not None:
            out["protocol"] = self.protocol.summary()
        if base is not None:
            out["catalog"] = [
                {"asset_id": r.asset_id, "type": r.asset_type, "bbox": r.bbox.to_dict(), "flags": list(r.safety.active())}
                for r in base
                if self.protocol is None or r.asset_id in self.protocol.required_assets or r.asset_type == "room_asset"
            ]
        return out


@dataclass
class ProposerResponse:
    commands: list = field(default_factory=list)
    placements: list = field(default_factory=list)


class Proposer:
    """Source of candidate edits. Subclasses implement :meth:`propose`."""

    name = "proposer"

    def propose(self, request: ProposerRequest) -> ProposerResponse:
        raise NotImplementedError


@dataclass
class TraceRecord:
    iteration: int
    level: str
    v: int
    F: float
    accepted: bool
    commands: list = field(default_factory=list)
    note: str = ""

    def to_dict(self) -> dict:
        return {
            "iteration": self.iteration,
            "level": self.level,
            "v": self.v,
            "F": self.F,
            "accepted": self.accepted,
            "commands": self.commands,
            "note": self.note,
        }


def trace_to_jsonl(records: Sequence) -> str:
    return "".join(json.dumps(r.to_dict() if hasattr(r, "to_dict") else r, sort_keys=True) + "\n" for r in records)


def _filter_level(commands, layout: Layout, level: str):
    keep = []
    for c in commands:
        ids = (c.id_a, c.id_b) if hasattr(c, "id_a") else (c.instance_id,)
        if all(i in layout and layout.get(i).on_floor == (level == "room") for i in ids):
            keep.append(c)
    return keep


def optimize(
    layout: Layout,
    protocol: Protocol | None,
    base: AssetBase,
    proposer: Proposer | None = None,
    config: OptimizerConfig = OptimizerConfig(),
    safety: SafetyConfig = SafetyConfig(),
) -> tuple[Layout, list[TraceRecord]]:
    """Two-level (room, then desktop) repair and proposal loop."""
    from .proposers import HeuristicProposer

    fallback = HeuristicProposer(base, safety=safety, weights=config.weights, margin=config.margin)
    proposer = proposer or fallback
    trace: list[TraceRecord] = []
    current = layout
    cur = assess(current, protocol, base, config.weights, safety)
    iteration = 0
    for level in LEVELS:
        idle = 0
        for _ in range(config.iterations(level)):
            iteration += 1
            accepted = False
            notes = []
            sent: list = []
            repaired = fast_repair(current, base, config.repair_rounds, config.margin).layout
            rep = assess(repaired, protocol, base, config.weights, safety)
            if better(rep, cur):
                current, cur, accepted = repaired, rep, True
                notes.append("repair")
            request = ProposerRequest(
                "adjust", current, protocol, level, cur.violations, attempt=iteration, seed=config.seed
            )
            try:
                commands = proposer.propose(request).commands
            except LabLayoutError as exc:
                notes.append(f"proposer failed ({type(exc).__name__}); heuristic fallback")
                commands = fallback.propose(request).commands
            commands = _filter_level(commands, current, level)
            if commands:
                sent = commands_to_list(commands)
                candidate, valid = apply_commands(current, commands, protocol, base, safety)
                if valid:
                    cand = assess(candidate, protocol, base, config.weights, safety)
                    if better(cand, cur):
                        current, cur, accepted = candidate, cand, True
                        notes.append("proposal accepted")
                    else:
                        notes.append("proposal not better")
                else:
                    notes.append("proposal rejected")
            else:
                notes.append("no proposal")
            trace.append(TraceRecord(iteration, level, cur.v, cur.reward, accepted, sent, "; ".join(notes)))
            idle = 0 if accepted else idle + 1
            if idle >= config.plateau:
                break
    return current, trace


def trace_is_monotone(trace: Sequence[TraceRecord]) -> bool:
    """Accepted records must strictly decrease (v, -F) lexicographically."""
    prev = None
    for r in trace:
        if not r.accepted:
            continue
        key = (r.v, -r.F)
        if prev is not None and not (key[0] < prev[0] or (key[0] == prev[0] and key[1] < prev[1])):
            return False
        prev = key
    return True
