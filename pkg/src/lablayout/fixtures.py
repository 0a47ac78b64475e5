"""Bundled data loaders and hand-built layouts used by tests, demos and the CLI.

Each navigation fixture pairs a layout with a two-step protocol whose single
goal pair has exactly one reachability defect.
"""

from __future__ import annotations

from importlib import resources
from pathlib import Path
from typing import Callable

from .assets import AssetBase, load_asset_base
from .protocol import MoveAction, Protocol, ProtocolStep, load_corpus, load_protocol, save_protocol
from .scene import FLOOR, Layout, PlacedObject, Pose, Room, desktop_to_global, save_layout


def data_dir() -> Path:
    return Path(str(resources.files("lablayout") / "data"))


def bundled_assets() -> AssetBase:
    return load_asset_base(data_dir() / "assets.json")


def bundled_protocol(name: str = "exp_003") -> Protocol:
    return load_protocol(data_dir() / "protocols" / f"{name}.json")


def corpus_dir() -> Path:
    return data_dir() / "corpus"


def bundled_corpus() -> list[Protocol]:
    return load_corpus(corpus_dir())


# -- builders ---------------------------------------------------------------------------


def floor(instance_id: str, asset_id: str, x: float, y: float, yaw: float = 0.0) -> PlacedObject:
    return PlacedObject(instance_id, asset_id, Pose(x, y, 0.0, yaw), FLOOR)


def item(parent: PlacedObject, base: AssetBase, instance_id: str, asset_id: str, u: float, v: float) -> PlacedObject:
    """A desktop item at tabletop-local (u, v), measured from the surface's front-left corner."""
    return PlacedObject(instance_id, asset_id, desktop_to_global(parent, base[parent.asset_id], u, v), parent.instance_id)


def two_stop_protocol(protocol_id: str, first: tuple[str, list[str]], second: tuple[str, list[str]]) -> Protocol:
    (loc1, used1), (loc2, used2) = first, second
    instruments = tuple(dict.fromkeys(used1 + used2)) or ("Beaker",)
    return Protocol(
        protocol_id=protocol_id,
        name=f"Two-stop check ({protocol_id})",
        reagents=("Ethanol",),
        instruments=instruments,
        steps=(
            ProtocolStep(1, "Prepare the sample.", loc1, tuple(used1), "preparation"),
            ProtocolStep(2, "Carry the sample to the second station.", loc2, tuple(used2)),
        ),
        moves=(MoveAction(1, 2),),
    )


def _bench_and_platform(base: AssetBase, bench_xy=(1.2, 5.5), platform_xy=(3.0, 0.5)) -> list[PlacedObject]:
    bench = floor("bench_back", "ExperimentTable", *bench_xy, 0.0)
    platform = floor("platform_front", "ValidationPlatform", *platform_xy, 180.0)
    return [
        bench,
        platform,
        item(bench, base, "beaker_1", "Beaker", 0.75, 0.3),
        item(platform, base, "lc_1", "LiquidChromatograph", 0.6, 0.35),
    ]


_BENCH_TO_PLATFORM = (("ExperimentTable", ["Beaker"]), ("ValidationPlatform", ["LiquidChromatograph"]))


def reachable_pair(base: AssetBase) -> tuple[Layout, Protocol]:
    """Back bench to front platform with a clear floor."""
    layout = Layout(Room(6.0, 6.0), _bench_and_platform(base), {"scene_id": "reachable_pair"})
    return layout, two_stop_protocol("reachable_pair", *_BENCH_TO_PLATFORM)


def blocked_start(base: AssetBase) -> tuple[Layout, Protocol]:
    """A cabinet sits on the bench's approach pose."""
    objs = _bench_and_platform(base)
    objs.insert(2, floor("cabinet_1", "ReagentCabinet", 1.2, 4.4, 0.0))
    return Layout(Room(6.0, 6.0), objs, {"scene_id": "blocked_start"}), two_stop_protocol("blocked_start", *_BENCH_TO_PLATFORM)


def blocked_goal(base: AssetBase) -> tuple[Layout, Protocol]:
    """A cabinet sits on the platform's approach pose."""
    objs = _bench_and_platform(base)
    objs.insert(2, floor("cabinet_1", "ReagentCabinet", 3.0, 1.6, 0.0))
    return Layout(Room(6.0, 6.0), objs, {"scene_id": "blocked_goal"}), two_stop_protocol("blocked_goal", *_BENCH_TO_PLATFORM)


def blocked_corridor(base: AssetBase) -> tuple[Layout, Protocol]:
    """A row of benches across the room; the gaps at both ends of the small one are too narrow."""
    objs = _bench_and_platform(base)
    objs[2:2] = [
        floor("bench_a1", "ExperimentTable", 0.75, 3.0, 0.0),
        floor("bench_a2", "ExperimentTable", 2.25, 3.0, 0.0),
        floor("platform_b", "ValidationPlatform", 3.9, 3.0, 0.0),
    ]
    layout = Layout(Room(4.9, 6.0), objs, {"scene_id": "blocked_corridor"})
    return layout, two_stop_protocol("blocked_corridor", *_BENCH_TO_PLATFORM)


def wall_facing_hood(base: AssetBase) -> tuple[Layout, Protocol]:
    """A fume hood against the back wall, turned so its working side faces the wall."""
    platform = floor("platform_front", "ValidationPlatform", 3.0, 0.5, 180.0)
    hood = floor("hood_1", "FumeHood", 3.0, 5.5, 180.0)
    objs = [
        platform,
        hood,
        item(platform, base, "lc_1", "LiquidChromatograph", 0.6, 0.35),
        item(hood, base, "beaker_1", "Beaker", 0.75, 0.4),
    ]
    protocol = two_stop_protocol("wall_facing_hood", ("ValidationPlatform", ["LiquidChromatograph"]), ("FumeHood", ["Beaker"]))
    return Layout(Room(6.0, 6.0), objs, {"scene_id": "wall_facing_hood"}), protocol


def out_of_interior_endpoint(base: AssetBase) -> tuple[Layout, Protocol]:
    """A small cart turned diagonally near the right wall: its approach pose lands outside the room."""
    objs = [
        floor("platform_front", "ValidationPlatform", 3.0, 0.5, 180.0),
        floor("cart_1", "InstrumentCart", 5.5, 3.0, 315.0),
    ]
    protocol = two_stop_protocol("out_of_interior_endpoint", ("ValidationPlatform", []), ("InstrumentCart", []))
    return Layout(Room(6.0, 6.0), objs, {"scene_id": "out_of_interior_endpoint"}), protocol


NAV_DEFECT_FIXTURES: dict[str, Callable[[AssetBase], tuple[Layout, Protocol]]] = {
    "blocked_start": blocked_start,
    "blocked_goal": blocked_goal,
    "severed_corridor": blocked_corridor,
    "wall_facing_hood": wall_facing_hood,
    "out_of_interior_endpoint": out_of_interior_endpoint,
}


def bench_demo_protocol() -> Protocol:
    return Protocol(
        protocol_id="bench_demo",
        name="Heated dissolution and neutralization",
        reagents=("Ethanol", "HydrochloricAcid", "SodiumHydroxide"),
        instruments=("HeatingPlate", "Beaker", "ErlenmeyerFlask"),
        steps=(
            ProtocolStep(1, "Measure ethanol into a beaker.", "ExperimentTable", ("Ethanol", "Beaker"), "preparation"),
            ProtocolStep(2, "Warm the flask on the heating plate.", "ExperimentTable", ("HeatingPlate", "ErlenmeyerFlask")),
            ProtocolStep(3, "Neutralize the acid with sodium hydroxide.", "FumeHood", ("HydrochloricAcid", "SodiumHydroxide")),
        ),
        moves=(MoveAction(2, 3),),
    )


def cluttered_bench(base: AssetBase) -> tuple[Layout, Protocol]:
    """A cabinet overlapping the bench, crowded items, ethanol beside a hot plate, acid against base."""
    bench = floor("bench_1", "ExperimentTable", 2.0, 4.5, 0.0)
    hood = floor("hood_1", "FumeHood", 4.3, 4.55, 0.0)
    cabinet = floor("cabinet_1", "ReagentCabinet", 2.6, 3.9, 0.0)
    objs = [
        bench,
        hood,
        cabinet,
        item(bench, base, "heating_plate_1", "HeatingPlate", 0.5, 0.4),
        item(bench, base, "ethanol_1", "Ethanol", 0.68, 0.4),
        item(bench, base, "beaker_1", "Beaker", 0.72, 0.42),
        item(bench, base, "flask_1", "ErlenmeyerFlask", 1.45, 0.05),
        item(hood, base, "hcl_1", "HydrochloricAcid", 0.7, 0.4),
        item(hood, base, "naoh_1", "SodiumHydroxide", 0.79, 0.4),
    ]
    return Layout(Room(6.0, 5.0), objs, {"scene_id": "cluttered_bench"}), bench_demo_protocol()


def full_demo(base: AssetBase, seed: int = 0) -> tuple[Layout, Protocol]:
    """The bundled deprotection protocol laid out by the heuristic proposer in an 8 x 6 room."""
    from .proposers import generate_layout

    protocol = bundled_protocol("exp_003")
    return generate_layout(protocol, base, Room(8.0, 6.0), seed=seed, scene_id="full_demo"), protocol


FIXTURES: dict[str, Callable[[AssetBase], tuple[Layout, Protocol]]] = {
    "reachable_pair": reachable_pair,
    "cluttered_bench": cluttered_bench,
    "full_demo": full_demo,
    **NAV_DEFECT_FIXTURES,
}


def load_fixture(name: str, base: AssetBase | None = None) -> tuple[Layout, Protocol]:
    if name not in FIXTURES:
        raise KeyError(f"unknown fixture {name!r}; choose from {sorted(FIXTURES)}")
    return FIXTURES[name](base or bundled_assets())


def export_fixtures(directory: str | Path, base: AssetBase | None = None) -> list[Path]:
    """Write every fixture as <name>.layout.json and <name>.protocol.json."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    base = base or bundled_assets()
    written = []
    for name in sorted(FIXTURES):
        layout, protocol = FIXTURES[name](base)
        for suffix, save, obj in (("layout", save_layout, layout), ("protocol", save_protocol, protocol)):
            path = directory / f"{name}.{suffix}.json"
            save(obj, path)
            written.append(path)
    return written
