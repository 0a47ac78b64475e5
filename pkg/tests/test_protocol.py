import copy
import json

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

import oracles
from lablayout.errors import ValidationError
from lablayout.fixtures import bundled_corpus, bundled_protocol
from lablayout.protocol import (
    ChemicalConstraintSpec,
    Protocol,
    ProtocolStep,
    format_stats_table,
    ground_protocol,
    load_protocol,
    protocol_from_dict,
    protocol_stats,
    require_valid,
    save_protocol,
    stats_to_json,
    validate_protocol,
)
from lablayout.synthetic import build_stats_corpus


@pytest.fixture
def exp003_raw():
    return bundled_protocol("exp_003").to_dict()


def test_exp003_case_counts(exp003):
    assert (len(exp003.reagents), len(exp003.instruments), len(exp003.steps)) == (5, 9, 8)
    assert "TrifluoroaceticAcid" in exp003.reagents
    assert "RotaryEvaporator" in exp003.instruments


def test_step_missing_location(exp003_raw):
    del exp003_raw["steps"][2]["location"]
    with pytest.raises(ValidationError) as exc:
        protocol_from_dict(exp003_raw)
    assert [i.path for i in exc.value.issues] == ["steps[2].location"]


def test_empty_steps(exp003_raw):
    exp003_raw["steps"] = []
    with pytest.raises(ValidationError) as exc:
        protocol_from_dict(exp003_raw)
    assert any(i.rule == "nonempty" and i.path == "steps" for i in exc.value.issues)


def test_backward_move_rejected(exp003_raw):
    exp003_raw["moves"] = [{"from_step": 3, "to_step": 2}]
    with pytest.raises(ValidationError):
        protocol_from_dict(exp003_raw)


def test_exp003_validates(base):
    assert validate_protocol(bundled_protocol("exp_003"), base) == []


def test_grounding_maps_to_ids(base):
    g = ground_protocol(bundled_protocol("exp_003"), base)
    assert all(r in base for r in (*g.reagents, *g.instruments))
    assert require_valid(bundled_protocol("exp_003"), base) == g


def test_unknown_constraint_subject(base):
    p = bundled_protocol("exp_003")
    bad = Protocol(**{**p.__dict__, "constraints": (ChemicalConstraintSpec("reagent_storage", ("Unobtainium",)),)})
    issues = validate_protocol(bad, base)
    assert [(i.path, i.rule) for i in issues] == [("constraints[0].subjects[0]", "resolvable")]


def test_non_surface_location(base):
    p = bundled_protocol("exp_003")
    steps = list(p.steps)
    steps[1] = ProtocolStep(steps[1].index, steps[1].description, "Beaker", steps[1].assets_used, steps[1].phase)
    issues = validate_protocol(Protocol(**{**p.__dict__, "steps": tuple(steps)}), base)
    assert [(i.path, i.rule) for i in issues] == [("steps[1].location", "location_legal")]


def test_preparation_must_come_first(base):
    p = bundled_protocol("exp_003")
    steps = [ProtocolStep(s.index, s.description, s.location, s.assets_used, None) for s in p.steps]
    steps[2] = ProtocolStep(steps[2].index, steps[2].description, steps[2].location, steps[2].assets_used, "preparation")
    issues = validate_protocol(Protocol(**{**p.__dict__, "steps": tuple(steps)}), base)
    assert [i.rule for i in issues] == ["preparation_first"]


def test_require_valid_raises(base):
    p = bundled_protocol("exp_003")
    bad = Protocol(**{**p.__dict__, "reagents": (*p.reagents, "Unobtainium")})
    with pytest.raises(ValidationError):
        require_valid(bad, base)


def test_round_trip(tmp_path):
    p = bundled_protocol("exp_003")
    save_protocol(p, tmp_path / "p.json")
    assert load_protocol(tmp_path / "p.json") == p


def _single(counts):
    out = []
    for k, n in enumerate(counts):
        out.append(
            Protocol(
                protocol_id=f"p{k}",
                name="",
                reagents=tuple(f"R{j}" for j in range(n)),
                instruments=("Beaker",),
                steps=(ProtocolStep(1, "s", "ExperimentTable"),),
            )
        )
    return out


def test_stats_single_protocol():
    s = protocol_stats(_single([4]))["Reagents"]
    assert (s.mean, s.min, s.max, s.std) == (4.0, 4, 4, 0.0)


def test_stats_two_point_population_std():
    s = protocol_stats(_single([2, 4]))["Reagents"]
    assert (s.mean, s.std) == (3.0, 1.0)


def test_stats_empty_corpus():
    with pytest.raises(ValueError):
        protocol_stats([])


def test_bundled_corpus_matches_generator():
    assert bundled_corpus() == build_stats_corpus()


def test_sample_std_reproduces_published_column():
    # the published spread figures are sample (n - 1) standard deviations of these counts
    stats = protocol_stats(build_stats_corpus(), ddof=1)
    assert [f"{stats[k].std:.2f}" for k in ("Reagents", "Instruments", "Steps", "Moves")] == ["1.86", "1.81", "1.46", "1.15"]


def test_stats_table_and_json_layout():
    stats = protocol_stats(build_stats_corpus())
    header = format_stats_table(stats).splitlines()[0].split()
    assert header[-4:] == ["Mean", "Min", "Max", "Std"]
    data = json.loads(stats_to_json(stats, 30))
    assert data["protocols"] == 30 and set(data["rows"]) == {"Reagents", "Instruments", "Steps", "Moves"}


@given(st.lists(st.integers(1, 15), min_size=1, max_size=40))
def test_stats_match_oracle(counts):
    s = protocol_stats(_single(counts))["Reagents"]
    assert s.mean == pytest.approx(sum(counts) / len(counts), abs=1e-9)
    assert (s.min, s.max) == (min(counts), max(counts))
    assert s.std == pytest.approx(oracles.pop_std(counts), abs=1e-9)
