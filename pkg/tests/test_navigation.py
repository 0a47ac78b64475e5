import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import oracles
from helpers import record
from lablayout.assets import asset_base_from_list
from lablayout.fixtures import floor, item, reachable_pair, two_stop_protocol
from lablayout.navigation import (
    END_BLOCKED,
    OK,
    PATH_BLOCKED,
    START_BLOCKED,
    GoalPair,
    NavConfig,
    NavOutcome,
    NavTarget,
    ReachReport,
    goal_pairs,
    goal_pairs_from_dict,
    goal_pairs_to_json,
    load_goal_pairs,
    plan_cells,
    rasterize,
    reachability,
    robot_theta,
    step_targets,
    target_for_object,
)
from lablayout.protocol import Protocol, ProtocolStep
from lablayout.scene import Layout, Room

BOXES = asset_base_from_list([record("Box", 1.0, 1.0, 1.0, surface=True), record("Slab", 1.0, 2.0, 0.9, surface=True)])


def test_item_on_larger_bench_targets_bench(base):
    bench = floor("bench", "ExperimentTable", 3, 3)
    scale = item(bench, base, "scale", "ElectronicScale", 0.75, 0.375)
    layout = Layout(Room(6, 6), [bench, scale])
    assert target_for_object(scale, layout, base, 0.3).target_id == "bench"


def test_robot_theta():
    assert robot_theta(90) == 270
    assert robot_theta(270) == 90


def test_target_formula():
    layout = Layout(Room(10, 10), [floor("b", "Box", 5, 5, 0)])
    t = target_for_object(layout.get("b"), layout, BOXES, 0.3)
    assert (t.x, t.y, t.theta) == pytest.approx((5.0, 3.9, 180.0), abs=1e-12)


def test_target_rotated_object():
    layout = Layout(Room(10, 10), [floor("b", "Slab", 5, 5, 90)])
    t = target_for_object(layout.get("b"), layout, BOXES, 0.3)
    # a quarter turn moves the approach point to the -x side
    assert (t.x, t.y, t.theta) == pytest.approx((5.0 - 1.1, 5.0, 270.0), abs=1e-12)


def _proto(*locations):
    steps = tuple(ProtocolStep(k + 1, f"step {k + 1}", loc) for k, loc in enumerate(locations))
    return Protocol("p", "p", ("Ethanol",), ("Beaker",), steps)


def test_same_bench_pair_discarded(base):
    layout, _ = reachable_pair(base)
    p = _proto("ExperimentTable", "ExperimentTable", "ValidationPlatform")
    assert len(step_targets(p, layout, base)) == 3
    pairs = goal_pairs(p, layout, base)
    assert len(pairs) == 1 and pairs[0].end.target_id == "platform_front"


def test_single_step_no_pairs(base):
    layout, _ = reachable_pair(base)
    assert goal_pairs(_proto("ExperimentTable"), layout, base) == []


def test_goal_pair_json_round_trip(tmp_path, base):
    layout, protocol = reachable_pair(base)
    pairs = goal_pairs(protocol, layout, base)
    text = goal_pairs_to_json(pairs, 2)
    data = json.loads(text)
    assert data["num_targets"] == 2 and data["num_goal_pairs"] == 1
    assert all(len(v) == 3 for v in (data["goal_pairs"][0]["start"], data["goal_pairs"][0]["end"]))
    path = tmp_path / "gp.json"
    path.write_text(text)
    again, n = load_goal_pairs(path)
    assert n == 2 and goal_pairs_to_json(again, n) == text


def test_empty_room_without_radius_is_free():
    grid = rasterize(Layout(Room(10, 10), []), BOXES, NavConfig(resolution=0.1, agent_radius=0.0))
    assert grid.occupied.shape == (100, 100)
    assert not grid.occupied.any()


def test_empty_room_wall_band():
    grid = rasterize(Layout(Room(10, 10), []), BOXES, NavConfig(resolution=0.1, agent_radius=0.3))
    occ = grid.occupied
    assert occ[0].all() and occ[-1].all() and occ[:, 0].all() and occ[:, -1].all()
    # cells whose centers are at least one radius from every wall stay free
    assert not occ[3:-3, 3:-3].any()
    assert occ[:2].all() and occ[:, :2].all()


def test_inflated_bench_extent():
    layout = Layout(Room(10, 10), [floor("b", "Box", 5, 5)])
    cfg = NavConfig(resolution=0.1, agent_radius=0.3)
    occ = rasterize(layout, BOXES, cfg).occupied.copy()
    occ[:5] = occ[-5:] = False
    occ[:, :5] = occ[:, -5:] = False
    rows, cols = np.nonzero(occ)
    assert abs((cols.max() - cols.min() + 1) * 0.1 - 1.6) <= 0.1 + 1e-9
    assert abs((rows.max() - rows.min() + 1) * 0.1 - 1.6) <= 0.1 + 1e-9
    # rounded corners: the inflated square's corner cell is free
    assert not occ[rows.min(), cols.min()]


def test_box_inflation_fills_corners():
    layout = Layout(Room(10, 10), [floor("b", "Box", 5, 5)])
    occ = rasterize(layout, BOXES, NavConfig(resolution=0.1, agent_radius=0.3, inflation="box")).occupied
    rows, cols = np.nonzero(occ[5:-5, 5:-5])
    assert occ[5:-5, 5:-5][rows.min(), cols.min()]


def test_free_grid_diagonal():
    out = plan_cells(np.zeros((5, 5), bool), (0, 0), (4, 4), resolution=0.1)
    assert out.status == OK
    assert out.length == pytest.approx(4 * math.sqrt(2) * 0.1, abs=1e-15)
    assert (out.straight_steps, out.diagonal_steps) == (0, 4)


def test_taxonomy():
    occ = np.zeros((9, 9), bool)
    occ[3:6, 3:6] = True
    assert plan_cells(occ, (4, 4), (0, 0)).status == START_BLOCKED
    assert plan_cells(occ, (0, 0), (4, 4)).status == END_BLOCKED
    assert plan_cells(occ, None, (0, 0)).status == START_BLOCKED
    wall = np.zeros((9, 9), bool)
    wall[:, 4] = True
    assert plan_cells(wall, (0, 0), (8, 8)).status == PATH_BLOCKED


def test_no_corner_cutting():
    occ = np.array([[False, True], [True, False]])
    assert plan_cells(occ, (0, 0), (1, 1)).status == PATH_BLOCKED


def test_start_equals_goal():
    out = plan_cells(np.zeros((3, 3), bool), (1, 1), (1, 1))
    assert out.status == OK and out.length == 0.0


def _report(statuses):
    pair = GoalPair(NavTarget(0, 0, 0), NavTarget(1, 1, 0))
    return ReachReport([pair] * len(statuses), [NavOutcome(s) for s in statuses], len(statuses) + 1)


def test_f_reach_aggregation():
    assert _report([OK, OK]).f_reach == 1
    assert _report([OK, PATH_BLOCKED, OK, OK]).f_reach == 0
    assert _report([]).f_reach == 1


def test_reachable_fixture(base):
    layout, protocol = reachable_pair(base)
    rep = reachability(layout, protocol, base)
    assert rep.f_reach == 1 and rep.total == 1 and rep.num_targets == 2


def test_pgm_export(base):
    layout, _ = reachable_pair(base)
    grid = rasterize(layout, base, NavConfig(resolution=0.1))
    data = grid.to_pgm()
    header = f"P5\n{grid.width} {grid.height}\n255\n".encode()
    assert data.startswith(header) and len(data) == len(header) + grid.width * grid.height


def test_cell_lookup():
    grid = rasterize(Layout(Room(2, 1), []), BOXES, NavConfig(resolution=0.5, agent_radius=0.0))
    assert grid.cell_of(0.0, 0.0) == (0, 0)
    assert grid.cell_of(1.99, 0.99) == (3, 1)
    assert grid.cell_of(2.0, 0.5) is None
    assert grid.center_of((1, 1)) == (0.75, 0.75)


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2**32 - 1), st.floats(0.0, 0.45))
def test_astar_matches_dijkstra(seed, density):
    rng = np.random.default_rng(seed)
    occ = rng.random((12, 12)) < density
    s = tuple(int(v) for v in rng.integers(0, 12, 2))
    g = tuple(int(v) for v in rng.integers(0, 12, 2))
    out = plan_cells(occ, s, g)
    assert out.status == oracles.classify(occ, s, g)
    if out.status == OK:
        assert (out.straight_steps, out.diagonal_steps) == oracles.grid_dijkstra(occ, s, g)
        path = out.path
        assert path[0] == s and path[-1] == g
        for a, b in zip(path, path[1:]):
            assert max(abs(a[0] - b[0]), abs(a[1] - b[1])) == 1
            assert not occ[b[1], b[0]]


@given(st.floats(-1000, 1000, allow_nan=False))
def test_theta_in_range(rz):
    t = robot_theta(rz)
    assert 0 <= t < 360
    assert t == pytest.approx(oracles.robot_theta(rz), abs=1e-9)
