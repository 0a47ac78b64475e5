import pytest

from lablayout.commands import Move
from lablayout.errors import PlacementInfeasible, ProposerUnavailable, ResponseRejected
from lablayout.fixtures import cluttered_bench
from lablayout.optimizer import OptimizerConfig, ProposerRequest, count_violations, optimize
from lablayout.proposers import (
    EndpointConfig,
    HeuristicProposer,
    RemoteProposer,
    generate_layout,
    interior_facing_yaw,
    parse_response,
    render_prompt,
    room_assets_for,
)
from lablayout.protocol import Protocol, ProtocolStep
from lablayout.scene import Layout, Room


def three_station_protocol(reagents=()):
    steps = (
        ProtocolStep(1, "Weigh.", "ExperimentTable", ("Beaker",), "preparation"),
        ProtocolStep(2, "React.", "FumeHood", ("RoundBottomFlask",)),
        ProtocolStep(3, "Analyse.", "ValidationPlatform", ("LiquidChromatograph",)),
    )
    return Protocol("three", "three", tuple(reagents), ("Beaker", "RoundBottomFlask", "LiquidChromatograph"), steps)


def test_parse_move():
    resp = parse_response({"commands": [{"move": {"id": "bench1", "pos": [3.0, 2.0]}}]}, "adjust")
    assert resp.commands == [Move("bench1", 3.0, 2.0)]


@pytest.mark.parametrize(
    "payload",
    [
        {"commands": [{"teleport": {"id": "bench1"}}]},
        {"commands": [], "note": "extra"},
        {"commands": "move everything"},
        ["not", "an", "object"],
    ],
)
def test_reject_bad_adjust(payload):
    with pytest.raises(ResponseRejected):
        parse_response(payload, "adjust")


def test_reject_bad_placement():
    with pytest.raises(ResponseRejected):
        parse_response({"placements": [{"asset_id": "Beaker", "position": [1, 1], "color": "red"}]}, "init_room")


def test_endpoint_down_retries(dead_url, base):
    sleeps = []
    proposer = RemoteProposer(EndpointConfig(dead_url, timeout_s=1.0, max_retries=2), base, sleep=sleeps.append)
    with pytest.raises(ProposerUnavailable):
        proposer.propose(ProposerRequest("adjust", Layout(Room(4, 4), []), None, "room", None))
    assert sleeps == [0.5, 1.0]


def test_remote_round_trip(json_server, monkeypatch, base):
    monkeypatch.setenv("LABLAYOUT_PROPOSER_TOKEN", "secret-value")
    layout, protocol = cluttered_bench(base)
    json_server.replies.append({"commands": [{"rotate": {"id": "hood_1", "angle": 90}}]})
    proposer = RemoteProposer(EndpointConfig(json_server.url, model="layout-model-x"), base)
    resp = proposer.propose(ProposerRequest("adjust", layout, protocol, "room", None))
    assert len(resp.commands) == 1
    req = json_server.requests[0]
    assert req["headers"]["Authorization"] == "Bearer secret-value"
    assert req["body"]["model"] == "layout-model-x"
    assert req["body"]["mode"] == "adjust" and "hood_1" in req["body"]["prompt"]
    assert "secret-value" not in req["body"]["prompt"]


def test_remote_non_json_rejected(json_server, base):
    json_server.replies.append(b"<html>oops</html>")
    proposer = RemoteProposer(EndpointConfig(json_server.url), base)
    with pytest.raises(ResponseRejected):
        proposer.propose(ProposerRequest("adjust", Layout(Room(4, 4), []), None, "room", None))


def test_remote_proposer_needs_endpoint():
    with pytest.raises(ValueError):
        RemoteProposer(EndpointConfig())


def test_optimizer_falls_back_when_remote_fails(dead_url, base):
    layout, protocol = cluttered_bench(base)
    remote = RemoteProposer(EndpointConfig(dead_url, timeout_s=0.5, max_retries=0), base, sleep=lambda s: None)
    out, trace = optimize(layout, protocol, base, remote, OptimizerConfig(room_iterations=2, desktop_iterations=1))
    assert any("fallback" in r.note for r in trace)
    assert count_violations(out, protocol, base).v <= count_violations(layout, protocol, base).v


def test_three_room_assets_placed(base):
    layout = generate_layout(three_station_protocol(), base, Room(8, 6))
    assert {o.asset_id for o in layout.floor_objects()} == {"ExperimentTable", "FumeHood", "ValidationPlatform"}
    assert count_violations(layout, None, base).v_geo == 0


def test_storage_cabinet_added_for_reagents(base):
    assets = {r.asset_id for r in room_assets_for(three_station_protocol(("Ethanol",)), base)}
    assert "ReagentCabinet" in assets


def test_generation_is_deterministic(base, exp003):
    a = generate_layout(exp003, base, Room(8, 6), seed=4)
    b = generate_layout(exp003, base, Room(8, 6), seed=4)
    assert a == b


def test_too_many_stations_for_room(base):
    steps = tuple(
        ProtocolStep(k + 1, "s", loc)
        for k, loc in enumerate(["ExperimentTable", "FumeHood", "ValidationPlatform", "EvaporatorStation", "InstrumentCart"])
    )
    p = Protocol("crowded", "crowded", (), ("Beaker",), steps)
    with pytest.raises(PlacementInfeasible):
        generate_layout(p, base, Room(2, 2))


def test_interior_facing_yaw():
    room = Room(6, 6)
    assert interior_facing_yaw((3.0, 5.5), room) == 0.0
    assert interior_facing_yaw((3.0, 0.5), room) == 180.0


def test_prompt_has_no_unfilled_fields(base, exp003):
    layout = generate_layout(exp003, base, Room(8, 6))
    for mode, level in (("init_room", "room"), ("init_desktop", "desktop"), ("adjust", "room")):
        text = render_prompt(ProposerRequest(mode, layout, exp003, level, None), base)
        assert "$" not in text.replace("$$", "")


def test_heuristic_only_emits_vocabulary(base):
    layout, protocol = cluttered_bench(base)
    resp = HeuristicProposer(base).propose(ProposerRequest("adjust", layout, protocol, "room", None))
    for c in resp.commands:
        assert next(iter(c.to_dict())) in ("move", "rotate", "swap")
