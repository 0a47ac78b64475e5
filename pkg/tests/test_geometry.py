import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

import oracles
from helpers import record
from lablayout.assets import asset_base_from_list
from lablayout import geometry
from lablayout.errors import UnrepairableError
from lablayout.geometry import (
    edge_distance,
    footprint,
    make_footprint,
    out_of_bounds,
    overlap,
    pairwise_collisions,
)
from lablayout.scene import FLOOR, Layout, PlacedObject, Pose, Room, desktop_to_global

BASE = asset_base_from_list(
    [
        record("Table", 1.0, 1.0, 0.9, surface=True),
        record("BigTable", 2.0, 4.0, 0.9, surface=True),
        record("Bench", 0.6, 1.0, 0.9, surface=True),
        record("Disc", 0.04, 0.04, 0.05, asset_type="instrument", category="glassware", surface=False),
        record("Dot", 1e-9, 1e-9, 0.05, asset_type="instrument", category="glassware", surface=False),
    ]
)


def unit(x, y, yaw=0.0):
    return make_footprint((x, y), 1.0, 1.0, yaw)


def test_unit_square_corners():
    assert sorted(map(tuple, unit(0, 0).corners.round(12))) == [(-0.5, -0.5), (-0.5, 0.5), (0.5, -0.5), (0.5, 0.5)]


def test_rotated_square_corners():
    c = unit(0, 0, 45).corners
    h = math.sqrt(2) / 2
    expected = np.array([(0.0, -h), (h, 0.0), (0.0, h), (-h, 0.0)])
    for p in expected:
        assert np.min(np.linalg.norm(c - p, axis=1)) < 1e-12


def test_rectangle_rotated_ninety():
    c = make_footprint((3, 4), 2.0, 1.0, 90).corners
    assert np.allclose(c.min(axis=0), (2.5, 3.0)) and np.allclose(c.max(axis=0), (3.5, 5.0))


def test_corners_are_counterclockwise():
    c = make_footprint((1, 2), 2.0, 0.5, 30).corners
    x, y = c[:, 0], c[:, 1]
    area2 = np.sum(x * np.roll(y, -1) - np.roll(x, -1) * y)
    assert area2 > 0 and math.isclose(area2 / 2, 1.0)


def test_separated_squares():
    assert not overlap(unit(0, 0), unit(2, 0)).overlapping


def test_overlap_depth_and_direction():
    res = overlap(unit(0, 0), unit(0.6, 0))
    assert res.overlapping
    assert res.depth == pytest.approx(0.4, abs=1e-12)
    assert res.direction == pytest.approx((1.0, 0.0))


def test_touching_is_not_overlapping():
    assert not overlap(unit(0, 0), unit(1.0, 0)).overlapping
    assert not overlap(unit(0, 0), unit(1.0, 1.0)).overlapping


def test_rotated_square_matches_sampling():
    a, b = (0, 0, 1, 1, 0), (0.9, 0, 1, 1, 45)
    got = overlap(make_footprint(a[:2], 1, 1, 0), make_footprint(b[:2], 1, 1, 45)).overlapping
    assert got == oracles.sampled_overlap(a, b) is True


def test_out_of_bounds_near_wall():
    corr = out_of_bounds(unit(0.2, 2), Room(10, 10))
    assert corr == pytest.approx((0.3, 0.0), abs=1e-12)


def test_interior_square_needs_no_correction():
    assert out_of_bounds(unit(5, 5), Room(10, 10)) is None


def test_square_larger_than_room():
    with pytest.raises(UnrepairableError):
        out_of_bounds(make_footprint((5, 5), 12, 12, 0), Room(10, 10))


def test_wall_thickness_shrinks_interior():
    corr = out_of_bounds(unit(0.6, 5), Room(10, 10, wall_thickness=0.2))
    assert corr == pytest.approx((0.1, 0.0), abs=1e-12)


def floor(iid, asset, x, y, yaw=0.0):
    return PlacedObject(iid, asset, Pose(x, y, 0.0, yaw), FLOOR)


def test_pairwise_separated_and_overlapping():
    sep = Layout(Room(10, 10), [floor("a", "Bench", 2, 2), floor("b", "Bench", 5, 5)])
    assert pairwise_collisions(sep, BASE) == []
    ov = Layout(Room(10, 10), [floor("a", "Bench", 2, 2), floor("b", "Bench", 2.6, 2)])
    hits = pairwise_collisions(ov, BASE)
    assert len(hits) == 1 and hits[0][:2] == ("a", "b")
    assert hits[0][2].depth == pytest.approx(0.4)


def test_items_on_different_surfaces_not_tested():
    a, b = floor("A", "Table", 2, 2), floor("B", "Table", 3.0, 2)
    item_a = PlacedObject("beaker", "Disc", desktop_to_global(a, BASE["Table"], 0.99, 0.5), "A")
    item_b = PlacedObject("flask", "Disc", desktop_to_global(b, BASE["Table"], 0.01, 0.5), "B")
    layout = Layout(Room(10, 10), [a, b, item_a, item_b])
    assert geometry.tested_pair_count(layout) == 1  # only the two tables
    assert pairwise_collisions(layout, BASE) == []


def attached(parent, asset, u, v):
    return PlacedObject("it", asset, desktop_to_global(parent, BASE[parent.asset_id], u, v), parent.instance_id)


def test_edge_distance_near_edge():
    top = floor("T", "BigTable", 5, 5, 0)
    it = attached(top, "Disc", 2.0, 0.10)
    assert edge_distance(it, BASE["Disc"], top, BASE["BigTable"]) == pytest.approx(0.08, abs=1e-12)


def test_edge_distance_centered_point():
    top = floor("T", "Table", 5, 5, 0)
    it = attached(top, "Dot", 0.5, 0.5)
    assert edge_distance(it, BASE["Dot"], top, BASE["Table"]) == pytest.approx(0.5, abs=1e-9)


def test_edge_distance_flush_and_overhang():
    top = floor("T", "Table", 5, 5, 30)
    flush = attached(top, "Disc", 0.02, 0.5)
    assert edge_distance(flush, BASE["Disc"], top, BASE["Table"]) == pytest.approx(0.0, abs=1e-12)
    over = attached(top, "Disc", 0.0, 0.5)
    assert edge_distance(over, BASE["Disc"], top, BASE["Table"]) == pytest.approx(-0.02, abs=1e-12)


rects = st.tuples(
    st.floats(0, 5), st.floats(0, 5), st.floats(0.1, 2), st.floats(0.1, 2), st.floats(0, 360)
).map(lambda t: (t[0], t[1], max(t[2], t[3]), min(t[2], t[3]), t[4]))


@given(rects, rects)
def test_overlap_is_symmetric(a, b):
    fa, fb = make_footprint(a[:2], *a[2:4], a[4]), make_footprint(b[:2], *b[2:4], b[4])
    r1, r2 = overlap(fa, fb), overlap(fb, fa)
    assert r1.overlapping == r2.overlapping
    if r1.overlapping:
        assert r1.depth == pytest.approx(r2.depth, abs=1e-9)


@given(rects, rects)
def test_minimal_translation_separates(a, b):
    fa, fb = make_footprint(a[:2], *a[2:4], a[4]), make_footprint(b[:2], *b[2:4], b[4])
    res = overlap(fa, fb)
    if res.overlapping:
        moved = fb.translated(np.array(res.direction) * (res.depth + 1e-6))
        assert not overlap(fa, moved).overlapping


@given(rects, st.floats(-720, 720))
def test_footprint_area_and_rotation_invariance(a, turn):
    fp = make_footprint(a[:2], *a[2:4], a[4])
    turned = make_footprint(a[:2], *a[2:4], a[4] + turn)
    assert fp.area == pytest.approx(a[2] * a[3])
    assert np.allclose(fp.center, turned.center)
    d1 = np.sort(np.linalg.norm(fp.corners - fp.center, axis=1))
    d2 = np.sort(np.linalg.norm(turned.corners - turned.center, axis=1))
    assert np.allclose(d1, d2)


@given(rects)
def test_out_of_bounds_correction_brings_inside(a):
    room = Room(6, 6)
    fp = make_footprint(a[:2], *a[2:4], a[4])
    corr = out_of_bounds(fp, room)
    if corr is not None:
        fp = fp.translated(corr)
    c = fp.corners
    assert c.min() >= -1e-9 and c.max() <= 6 + 1e-9
    assert out_of_bounds(fp, room) is None


def test_footprint_uses_long_side_on_local_x():
    fp = footprint(floor("b", "Bench", 2, 3, 0), BASE["Bench"])
    c = fp.corners
    assert np.ptp(c[:, 0]) == pytest.approx(1.0) and np.ptp(c[:, 1]) == pytest.approx(0.6)
