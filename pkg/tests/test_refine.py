import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from lablayout.commands import apply_translation, rotate_by
from lablayout.fixtures import (
    blocked_corridor,
    floor,
    item,
    reachable_pair,
    two_stop_protocol,
    wall_facing_hood,
)
from lablayout.navigation import NavConfig, reachability
from lablayout.refine import (
    AdjustmentSuggestion,
    RefineConfig,
    analyze,
    apply_suggestions,
    dedup,
    history_to_jsonl,
    refine_loop,
    unreachable_ratio,
)
from lablayout.scene import Layout, PlacedObject, Pose, Room


def T(iid, axis, delta):
    return AdjustmentSuggestion(iid, "translation", axis, delta)


def test_cart_near_wall_translates_inward(base):
    r = 0.4
    cart = floor("cart_1", "InstrumentCart", 5.7, 3.0, 0.0)
    layout = Layout(Room(6, 6), [floor("platform_front", "ValidationPlatform", 3.0, 0.5, 180.0), cart])
    protocol = two_stop_protocol("wall", ("ValidationPlatform", []), ("InstrumentCart", []))
    cfg = RefineConfig(nav=NavConfig(agent_radius=r))
    report = reachability(layout, protocol, base, cfg.nav)
    assert [o.status for o in report.outcomes] == ["end_blocked"]
    deficit = report.pairs[0].end.x - (6.0 - r)
    fixes = analyze(layout, protocol, base, cfg, report)
    assert [(s.instance_id, s.kind, s.axis) for s in fixes] == [("cart_1", "translation", "x")]
    assert fixes[0].delta == pytest.approx(-(deficit + cfg.clearance_margin), abs=1e-12)


def test_wall_facing_hood_rotates(base):
    layout, protocol = wall_facing_hood(base)
    fixes = analyze(layout, protocol, base)
    assert [(s.instance_id, s.kind, s.target_theta) for s in fixes] == [("hood_1", "rotation", 0.0)]


def test_reachable_scene_has_no_fixes(base):
    layout, protocol = reachable_pair(base)
    assert analyze(layout, protocol, base) == []


def test_dedup_keeps_largest_per_axis():
    assert dedup([T("B", "x", -0.5), T("B", "x", 0.2)]) == [T("B", "x", -0.5)]
    assert dedup([T("B", "x", -0.5), T("B", "y", 0.3)]) == [T("B", "x", -0.5), T("B", "y", 0.3)]
    assert dedup([]) == []


def test_translation_is_rigid(base):
    bench = PlacedObject("B", "ExperimentTable", Pose(2.0, 3.0), "floor")
    it = PlacedObject("v", "Beaker", Pose(2.1, 3.2, 0.9), "B")
    out = apply_translation(Layout(Room(8, 6), [bench, it]), "B", 1.0)
    assert (out.get("B").pose.x, out.get("B").pose.y) == (3.0, 3.0)
    assert (out.get("v").pose.x, out.get("v").pose.y) == pytest.approx((3.1, 3.2), abs=1e-15)
    same = apply_translation(Layout(Room(8, 6), [bench, it]), "B", 0.0)
    assert same == Layout(Room(8, 6), [bench, it])


def test_full_turn_is_identity(base):
    bench = floor("B", "ExperimentTable", 3, 3, 20)
    layout = Layout(Room(8, 6), [bench, item(bench, base, "v", "Beaker", 0.3, 0.2), item(bench, base, "w", "Beaker", 1.2, 0.5)])
    out = rotate_by(layout, "B", 360)
    for a, b in zip(layout.objects, out.objects):
        assert (a.pose.x, a.pose.y) == pytest.approx((b.pose.x, b.pose.y), abs=1e-12)
        assert abs((a.pose.yaw - b.pose.yaw + 180) % 360 - 180) < 1e-9


def test_blocked_corridor_refines(base):
    layout, protocol = blocked_corridor(base)
    out, history = refine_loop(layout, protocol, base)
    assert history[0].U == 1 and history[-1].U == 0
    assert len(history) <= 3
    assert reachability(out, protocol, base).f_reach == 1


def test_reachable_history_length_one(base):
    layout, protocol = reachable_pair(base)
    out, history = refine_loop(layout, protocol, base)
    assert len(history) == 1 and history[0].U == 0 and out == layout


def test_history_jsonl(base):
    layout, protocol = blocked_corridor(base)
    _, history = refine_loop(layout, protocol, base)
    lines = history_to_jsonl(history).splitlines()
    assert len(lines) == len(history) and '"U": 1' in lines[0]


def test_ratio():
    assert unreachable_ratio(3, 12) == 25.0
    assert unreachable_ratio(0, 0) == 0.0


def test_apply_order_translations_before_rotations(base):
    layout, _ = wall_facing_hood(base)
    out = apply_suggestions(
        layout,
        [AdjustmentSuggestion("hood_1", "rotation", delta=180.0, target_theta=0.0), T("hood_1", "x", 0.5)],
    )
    hood = out.get("hood_1")
    assert (hood.pose.x, hood.pose.yaw) == pytest.approx((3.5, 0.0))


def test_zero_translation_rejected():
    with pytest.raises(ValueError):
        AdjustmentSuggestion("B", "translation", "x", 0.0)


@given(st.lists(st.tuples(st.sampled_from(["A", "B"]), st.sampled_from(["x", "y"]), st.floats(-2, 2).filter(lambda v: v != 0)), max_size=12))
def test_dedup_properties(raw):
    items = [T(*r) for r in raw]
    out = dedup(items)
    assert len({s.group for s in out}) == len(out)
    for s in out:
        same = [i for i in items if i.group == s.group]
        assert abs(s.delta) == max(abs(i.delta) for i in same)
