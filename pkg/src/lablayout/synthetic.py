"""Synthetic inputs: repairable perturbed scenes and a statistics corpus.

Repairable scenes start from a valid packing (one box per grid cell, with
generous free space) and are then perturbed into overlaps and wall crossings,
so a collision-free in-bounds arrangement is known to exist.
"""

from __future__ import annotations

import math
from pathlib import Path

import numpy as np

from .assets import AssetBase, asset_base_from_list
from .geometry import footprint, out_of_bounds, pairwise_collisions
from .protocol import MoveAction, Protocol, ProtocolStep, save_protocol
from .scene import FLOOR, Layout, PlacedObject, Pose, Room

CELL_W, CELL_D = 1.6, 1.4
CELL_GAP = 0.1

# Count multisets of the statistics corpus: (first value, counts per consecutive value).
CORPUS_COUNTS = {
    "reagents": (3, (1, 13, 9, 1, 1, 0, 5)),
    "instruments": (7, (1, 0, 19, 5, 0, 1, 0, 4)),
    "steps": (6, (1, 0, 16, 3, 1, 9)),
    "moves": (3, (8, 13, 1, 8)),
}

CORPUS_REAGENTS = (
    "TertButylCarbazate", "TrifluoroaceticAcid", "Dichloromethane", "SodiumCarbonate", "EthylAcetate",
    "Ethanol", "HydrochloricAcid", "SodiumHydroxide", "PotassiumPermanganate", "Acetone", "Sodium",
)
CORPUS_INSTRUMENTS = (
    "RoundBottomFlask", "Beaker", "SeparatoryFunnel", "GraduatedCylinder", "Pipette", "GlassRod",
    "ElectronicScale", "RotaryEvaporator", "LiquidChromatograph", "HeatingPlate", "MagneticStirrer",
    "ErlenmeyerFlask", "TestTube", "Thermometer", "BuchnerFunnel", "Condenser",
)
CORPUS_LOCATIONS = ("ExperimentTable", "FumeHood", "EvaporatorStation", "ValidationPlatform")


def expand_counts(start: int, counts) -> list[int]:
    return [start + i for i, c in enumerate(counts) for _ in range(c)]


def box_record(asset_id: str, long_side: float, short_side: float, height: float = 1.0) -> dict:
    return {
        "asset_id": asset_id,
        "asset_type": "room_asset",
        "category": "equipment",
        "subtype": "box",
        "synonyms": [],
        "description": "Synthetic box.",
        "bbox": {"short_side": short_side, "long_side": long_side, "height": height},
        "scale_factor": 1.0,
        "front_direction": [0.0, 1.0, 0.0],
        "coordinate_system": "z_up",
        "usd_path": "",
        "safety": {},
        "provides_surface": False,
    }


def _fits_cell(long_side: float, short_side: float, yaw: float) -> bool:
    c, s = abs(math.cos(math.radians(yaw))), abs(math.sin(math.radians(yaw)))
    ex = long_side * c + short_side * s
    ey = long_side * s + short_side * c
    return ex <= CELL_W - CELL_GAP and ey <= CELL_D - CELL_GAP


def valid_scene(rng: np.random.Generator, n_objects: int) -> tuple[Layout, AssetBase]:
    """Boxes placed one per grid cell: collision-free and in bounds by construction."""
    cols = math.ceil(math.sqrt(2.0 * n_objects))
    rows = math.ceil(2.0 * n_objects / cols)
    room = Room(cols * CELL_W, rows * CELL_D)
    cells = rng.choice(cols * rows, size=n_objects, replace=False)
    records, objects = [], []
    for k, cell in enumerate(sorted(int(c) for c in cells)):
        r, c = divmod(cell, cols)
        while True:
            long_side = float(rng.uniform(0.5, 1.3))
            short_side = float(rng.uniform(0.3, min(long_side, 1.0)))
            yaw = float(rng.choice([0.0, 90.0, 180.0, 270.0])) if rng.random() < 0.6 else float(rng.uniform(0, 360))
            if _fits_cell(long_side, short_side, yaw):
                break
        aid = f"Box{k:02d}"
        records.append(box_record(aid, round(long_side, 3), round(short_side, 3)))
        center = ((c + 0.5) * CELL_W, (r + 0.5) * CELL_D)
        objects.append(PlacedObject(f"{aid}_0", aid, Pose(center[0], center[1], 0.0, round(yaw, 3)), FLOOR))
    return Layout(room, objects, {"synthetic": True}), asset_base_from_list(records)


def perturb(layout: Layout, base: AssetBase, rng: np.random.Generator) -> Layout:
    """Push some boxes onto neighbours and some across walls."""
    out = layout.copy()
    ids = [o.instance_id for o in layout.objects]
    n = len(ids)
    order = rng.permutation(n)
    n_collide = int(rng.integers(1, max(2, n // 3) + 1))
    n_bounds = int(rng.integers(1, 3))
    movers = [ids[i] for i in order[: n_collide + n_bounds]]
    for mover in movers[:n_collide]:
        other = ids[int(rng.integers(n))]
        if other == mover:
            continue
        obj, tgt = out.get(mover), out.get(other)
        t = float(rng.uniform(0.45, 0.8))
        xy = obj.pose.xy + t * (tgt.pose.xy - obj.pose.xy)
        out.set_pose(mover, Pose(xy[0], xy[1], obj.pose.z, obj.pose.yaw))
    room = out.room
    for mover in movers[n_collide:]:
        obj = out.get(mover)
        fp = footprint(obj, base[obj.asset_id])
        lo, hi = fp.corners.min(axis=0), fp.corners.max(axis=0)
        push = float(rng.uniform(0.1, 0.4))
        side = int(rng.integers(4))
        x, y = obj.pose.x, obj.pose.y
        if side == 0:
            x += -lo[0] - push
        elif side == 1:
            x += room.width - hi[0] + push
        elif side == 2:
            y += -lo[1] - push
        else:
            y += room.depth - hi[1] + push
        out.set_pose(mover, Pose(x, y, obj.pose.z, obj.pose.yaw))
    return out


def repairable_scene(seed: int, n_min: int = 5, n_max: int = 15) -> tuple[Layout, AssetBase]:
    """A seeded scene with at least one boundary and one collision violation."""
    rng = np.random.default_rng(seed)
    n = int(rng.integers(n_min, n_max + 1))
    valid, base = valid_scene(rng, n)
    while True:
        scene = perturb(valid, base, rng)
        ob = sum(1 for o in scene.floor_objects() if out_of_bounds(footprint(o, base[o.asset_id]), scene.room) is not None)
        if ob and pairwise_collisions(scene, base):
            scene.metadata["scene_id"] = f"synthetic_{seed:03d}"
            return scene, base


def build_stats_corpus() -> list[Protocol]:
    """Thirty protocols whose count distributions match the published corpus statistics.

    Sorted step counts are paired with sorted move counts so every protocol has
    at least one more step than moves; reagent and instrument counts are
    shuffled with a fixed generator.
    """
    rng = np.random.default_rng(2025)
    reagents = rng.permutation(expand_counts(*CORPUS_COUNTS["reagents"]))
    instruments = rng.permutation(expand_counts(*CORPUS_COUNTS["instruments"]))
    steps = sorted(expand_counts(*CORPUS_COUNTS["steps"]))
    moves = sorted(expand_counts(*CORPUS_COUNTS["moves"]))
    corpus = []
    for i, (n_r, n_i, n_s, n_m) in enumerate(zip(reagents, instruments, steps, moves)):
        shift = i % len(CORPUS_REAGENTS)
        reag = [CORPUS_REAGENTS[(shift + j) % len(CORPUS_REAGENTS)] for j in range(int(n_r))]
        inst = [CORPUS_INSTRUMENTS[(i + j) % len(CORPUS_INSTRUMENTS)] for j in range(int(n_i))]
        pool = reag + inst
        step_list = []
        for k in range(1, n_s + 1):
            loc = CORPUS_LOCATIONS[(min(k, n_m + 1) - 1) % len(CORPUS_LOCATIONS)]
            used = [pool[(k - 1) % len(pool)], pool[(k - 1 + n_s) % len(pool)]]
            used = list(dict.fromkeys(used))
            phase = "preparation" if k == 1 else ""
            step_list.append(ProtocolStep(k, f"Step {k} of synthetic protocol {i + 1:02d}.", loc, tuple(used), phase))
        corpus.append(
            Protocol(
                protocol_id=f"syn_{i + 1:02d}",
                name=f"Synthetic protocol {i + 1:02d}",
                reagents=tuple(reag),
                instruments=tuple(inst),
                steps=tuple(step_list),
                moves=tuple(MoveAction(k, k + 1) for k in range(1, n_m + 1)),
            )
        )
    return corpus


def write_corpus(directory: str | Path, corpus: list[Protocol] | None = None) -> list[Path]:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    paths = []
    for p in corpus or build_stats_corpus():
        path = directory / f"{p.protocol_id}.json"
        save_protocol(p, path)
        paths.append(path)
    return paths
