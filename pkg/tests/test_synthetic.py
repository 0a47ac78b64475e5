import numpy as np
from hypothesis import given, settings, strategies as st

from lablayout.geometry import footprint, out_of_bounds, pairwise_collisions
from lablayout.protocol import protocol_stats
from lablayout.synthetic import build_stats_corpus, expand_counts, repairable_scene, valid_scene, write_corpus


def test_expand_counts():
    assert expand_counts(3, (2, 0, 1)) == [3, 3, 5]


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 10_000), st.integers(2, 20))
def test_valid_scene_is_valid(seed, n):
    layout, base = valid_scene(np.random.default_rng(seed), n)
    assert len(layout.objects) == n
    assert not pairwise_collisions(layout, base)
    assert all(out_of_bounds(footprint(o, base[o.asset_id]), layout.room) is None for o in layout.objects)


def test_repairable_scene_has_both_violations():
    for seed in range(10):
        layout, base = repairable_scene(seed)
        assert 5 <= len(layout.objects) <= 15
        assert pairwise_collisions(layout, base)
        assert any(out_of_bounds(footprint(o, base[o.asset_id]), layout.room) is not None for o in layout.objects)
        assert layout.metadata["scene_id"] == f"synthetic_{seed:03d}"


def test_repairable_scene_deterministic():
    assert repairable_scene(4)[0] == repairable_scene(4)[0]


def test_corpus_shape_and_stats():
    corpus = build_stats_corpus()
    assert len(corpus) == 30
    assert all(len(p.steps) > len(p.moves) for p in corpus)
    stats = protocol_stats(corpus)
    assert round(stats["Steps"].mean, 2) == 9.00


def test_write_corpus(tmp_path):
    paths = write_corpus(tmp_path)
    assert len(paths) == 30 and all(p.exists() for p in paths)
