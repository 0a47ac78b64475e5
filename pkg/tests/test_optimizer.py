import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from helpers import record
from lablayout.assets import asset_base_from_list
from lablayout.commands import (
    Move,
    Rotate,
    Swap,
    apply_command,
    apply_rotation,
    command_from_dict,
    commands_from_list,
    rotate_by,
    yaw_delta,
)
from lablayout.errors import ResponseRejected, UnrepairableError
from lablayout.fixtures import cluttered_bench, floor, item
from lablayout.geometry import footprint, overlap
from lablayout.optimizer import (
    Assessment,
    OptimizerConfig,
    RewardWeights,
    ViolationReport,
    apply_commands,
    assess,
    better,
    count_violations,
    fast_repair,
    geometric_violations,
    optimize,
    reward,
    trace_is_monotone,
)
from lablayout.safety import ChemReport
from lablayout.scene import FLOOR, Layout, PlacedObject, Pose, Room, desktop_to_global
from lablayout.synthetic import repairable_scene

BASE = asset_base_from_list(
    [
        record("Bench", 1.0, 3.0, 0.9, surface=True),
        record("Box", 1.0, 1.0, 1.0, surface=False),
        record("Vial", 0.02, 0.02, 0.05, asset_type="instrument", category="glassware", surface=False),
    ]
)


def obj(iid, asset, x, y, yaw=0.0):
    return PlacedObject(iid, asset, Pose(x, y, 0.0, yaw), FLOOR)


def test_valid_layout_no_violations(base):
    layout = Layout(Room(8, 6), [floor("b", "ExperimentTable", 2, 2)])
    rep = count_violations(layout, None, base)
    assert rep.v == 0 and rep.boundary == [] and rep.collision == [] and rep.critical == []


def test_one_bench_out_of_bounds(base):
    layout = Layout(Room(8, 6), [floor("b", "ExperimentTable", 0.45, 2)])
    rep = count_violations(layout, None, base)
    assert rep.v == 1 and len(rep.boundary) == 1


def test_critical_safety_counts(base):
    bench = floor("b", "ExperimentTable", 2, 2)
    layout = Layout(
        Room(8, 6),
        [bench, item(bench, base, "etoh", "Ethanol", 0.3, 0.3), item(bench, base, "hp", "HeatingPlate", 0.45, 0.3)],
    )
    rep = count_violations(layout, None, base)
    assert rep.v_geo == 0 and rep.v == 1 and len(rep.critical) == 1


def test_reward_perfect_is_one(base):
    bench = floor("b", "ExperimentTable", 2, 2)
    layout = Layout(Room(8, 6), [bench, item(bench, base, "beaker", "Beaker", 0.75, 0.375)])
    assert reward(layout, None, base) == 1.0


def test_reward_weight_isolation(base):
    bench = floor("b", "ExperimentTable", 2, 2)
    layout = Layout(Room(8, 6), [bench, item(bench, base, "beaker", "Beaker", 0.05, 0.375)])
    a = assess(layout, None, base, RewardWeights(1.0, 0.0))
    assert a.chem.f_chem < 1.0 and a.reward == 1.0


def test_reward_weighted_sum():
    w = RewardWeights(0.5, 0.5)
    assert w.w_geo * 1.0 + w.w_chem * 0.6 == pytest.approx(0.8)


def test_repair_bench_outside_carries_items():
    bench = obj("b", "Bench", 1.3, 5.0)
    layout = Layout(Room(10, 10), [bench, PlacedObject("v", "Vial", desktop_to_global(bench, BASE["Bench"], 1.5, 0.5), "b")])
    before = np.array([o.pose.xy for o in layout.objects])
    out = fast_repair(layout, BASE)
    assert out.converged
    after = np.array([o.pose.xy for o in out.layout.objects])
    shift = after - before
    assert shift[0] == pytest.approx((0.2, 0.0)) and shift[1] == pytest.approx(shift[0])


def test_repair_two_overlapping_boxes():
    layout = Layout(Room(10, 10), [obj("a", "Box", 5.0, 5.0), obj("b", "Box", 5.6, 5.0)])
    out = fast_repair(layout, BASE, margin=0.02)
    b = out.layout.get("b")
    assert (b.pose.x, b.pose.y) == pytest.approx((5.6 + 0.4 + 0.02, 5.0))
    assert out.layout.get("a").pose == layout.get("a").pose


def test_repair_three_boxes_in_a_corner():
    layout = Layout(Room(3, 3), [obj("a", "Box", 0.5, 0.5), obj("b", "Box", 0.9, 0.7), obj("c", "Box", 0.6, 1.0)])
    out = fast_repair(layout, BASE)
    assert out.converged
    assert count_violations(out.layout, None, BASE).v_geo == 0


def test_repair_oversize_raises():
    with pytest.raises(UnrepairableError):
        fast_repair(Layout(Room(2, 2), [obj("b", "Bench", 1, 1)]), BASE)


def test_rotate_item_follows_surface():
    bench = obj("b", "Bench", 5, 5)
    it = PlacedObject("v", "Vial", desktop_to_global(bench, BASE["Bench"], 2.5, 0.5), "b")
    out = rotate_by(Layout(Room(10, 10), [bench, it]), "b", 90)
    v = out.get("v")
    assert (v.pose.x - 5, v.pose.y - 5) == pytest.approx((0.0, 1.0), abs=1e-12)
    assert v.pose.yaw == pytest.approx(90.0)


def test_rotate_is_absolute_target():
    layout = Layout(Room(10, 10), [obj("b", "Bench", 5, 5, 30)])
    out = apply_command(layout, Rotate("b", 120.0), BASE)
    assert out.get("b").pose.yaw == pytest.approx(120.0)
    assert yaw_delta(350, 10) == pytest.approx(20.0) and yaw_delta(10, 350) == pytest.approx(-20.0)


def test_move_into_collision_rejected():
    layout = Layout(Room(10, 10), [obj("a", "Box", 2, 2), obj("b", "Box", 6, 6)])
    out, ok = apply_commands(layout, [Move("b", 2.3, 2.0)], None, BASE)
    assert not ok and out is layout


def test_swap_equal_benches():
    layout = Layout(Room(10, 10), [obj("a", "Bench", 2, 2), obj("b", "Bench", 6, 6, 90)])
    out, ok = apply_commands(layout, [Swap("a", "b")], None, BASE)
    assert ok
    assert count_violations(out, None, BASE).v == count_violations(layout, None, BASE).v
    assert (out.get("a").pose.x, out.get("a").pose.yaw) == (6, 90)


def test_command_parsing():
    assert command_from_dict({"move": {"id": "bench1", "pos": [3.0, 2.0]}}) == Move("bench1", 3.0, 2.0)
    assert commands_from_list([{"swap": {"ids": ["a", "b"]}}]) == [Swap("a", "b")]
    for bad in ({"teleport": {"id": "a"}}, {"move": {"id": "a", "pos": [1]}}, {"rotate": {"id": "a", "angle": "x"}}, {}):
        with pytest.raises(ResponseRejected):
            command_from_dict(bad)


def _a(v, f):
    rep = ViolationReport()
    rep.boundary = [("x", (0.0, 0.0))] * v
    return Assessment(rep, 1.0, ChemReport(None, None, None, None), f)


def test_acceptance_rule():
    assert better(_a(2, 0.1), _a(3, 0.9))
    assert not better(_a(2, 0.6), _a(2, 0.6))
    assert better(_a(2, 0.61), _a(2, 0.6))
    assert not better(_a(3, 0.9), _a(2, 0.1))


def test_optimal_layout_unchanged(base):
    bench = floor("b", "ExperimentTable", 2, 2)
    layout = Layout(Room(8, 6), [bench, item(bench, base, "beaker", "Beaker", 0.75, 0.375)])
    out, trace = optimize(layout, None, base)
    assert out == layout
    assert sum(r.accepted for r in trace) == 0


def test_cluttered_bench(base):
    layout, protocol = cluttered_bench(base)
    first = assess(layout, protocol, base)
    out, trace = optimize(layout, protocol, base, config=OptimizerConfig(seed=0))
    last = assess(out, protocol, base)
    assert first.v > 0
    assert last.v == 0 and last.reward >= first.reward
    assert trace_is_monotone(trace)
    vs = [r.v for r in trace if r.accepted]
    assert vs == sorted(vs, reverse=True)


def test_optimize_is_deterministic(base):
    layout, protocol = cluttered_bench(base)
    a = optimize(layout, protocol, base, config=OptimizerConfig(seed=3))
    b = optimize(layout, protocol, base, config=OptimizerConfig(seed=3))
    assert a[0] == b[0] and [r.to_dict() for r in a[1]] == [r.to_dict() for r in b[1]]


@settings(max_examples=15, deadline=None)
@given(st.integers(0, 10_000))
def test_fast_repair_never_adds_violations(seed):
    scene, base = repairable_scene(seed)
    before = geometric_violations(scene, base).v_geo
    out = fast_repair(scene, base)
    assert out.residual.v_geo <= before
    if out.converged:
        fps = [footprint(o, base[o.asset_id]) for o in out.layout.floor_objects()]
        assert not any(overlap(fps[i], fps[j]).overlapping for i in range(len(fps)) for j in range(i + 1, len(fps)))


@settings(max_examples=25, deadline=None)
@given(st.floats(-720, 720), st.floats(0, 360))
def test_apply_rotation_reaches_target(start, target):
    layout = Layout(Room(10, 10), [obj("b", "Bench", 5, 5, start)])
    got = apply_rotation(layout, "b", target).get("b").pose.yaw
    diff = abs((got - target + 180) % 360 - 180)
    assert diff < 1e-9
