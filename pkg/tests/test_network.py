import json

import pytest

from gridplan.fixtures import intro_ring, trail_grid
from gridplan.network import (
    Bus,
    Line,
    NetworkFormatError,
    Switch,
    load_network,
    network_from_dict,
    network_to_dict,
    save_network,
    validate,
)


def test_fixtures_are_valid():
    assert validate(intro_ring()).ok
    assert validate(trail_grid()).ok


def test_intro_ring_shape():
    net = intro_ring()
    assert len(net.lines) == 6
    assert len(net.switches) == 10
    assert net.load_points == frozenset({"LP1", "LP2", "LP3", "LP4", "LP5"})
    assert net.line("2").length == 7.0 and net.line("6").length == 4.0
    assert [s.id for s in net.switches if not s.closed] == ["6"]
    assert net.switch("6").line_id == "4"


def test_lookup_and_replace_do_not_mutate():
    net = intro_ring()
    other = net.replace(buses=net.buses + (Bus("X", 20.0),))
    assert other.bus("X").nominal_voltage == 20.0
    with pytest.raises(KeyError):
        net.bus("X")


@pytest.mark.parametrize(
    "mutate, needle",
    [
        (lambda n: n.replace(buses=n.buses + (n.buses[0],)), "duplicate id"),
        (lambda n: n.replace(lines=n.lines + (Line("9", "LP1", "NOPE", 1.0, "NA2XS2Y 1x95"),)), "missing bus"),
        (lambda n: n.replace(lines=n.lines + (Line("9", "LP1", "LP2", 0.0, "NA2XS2Y 1x95"),)), "length"),
        (lambda n: n.replace(lines=n.lines + (Line("9", "LP1", "LP2", 1.0, "unobtainium"),)), "std_type"),
        (lambda n: n.replace(switches=n.switches + (Switch("99", "1", "LP3"),)), "not an endpoint"),
        (lambda n: n.replace(switches=n.switches + (Switch("99", "42", "LP3"),)), "missing line"),
    ],
)
def test_validation_catches(mutate, needle):
    report = validate(mutate(intro_ring()))
    assert not report.ok
    assert needle in str(report)


def test_validation_rank_and_tap():
    net = intro_ring()
    t0, t1 = net.line_types
    bad = net.replace(line_types=(t0, type(t1)(t1.name, 0.1, 0.1, 1.0, 1.0, t0.diameter_rank)))
    assert "diameter_rank" in str(validate(bad))
    tr = net.transformers[0]
    bad = net.replace(transformers=(type(tr)(**{**tr.__dict__, "tap_position": 9}),))
    assert "tap_position" in str(validate(bad))


def test_json_roundtrip(tmp_path):
    for net in (intro_ring(), trail_grid()):
        path = tmp_path / f"{net.name}.json"
        save_network(net, path)
        again = load_network(path)
        assert again == net
        assert network_to_dict(again) == json.loads(path.read_text())


def test_malformed_json_reports_position(tmp_path):
    path = tmp_path / "bad.json"
    path.write_text('{"buses": [\n  {"id": "a",}\n]}')
    with pytest.raises(NetworkFormatError, match="line 2"):
        load_network(path)


def test_unknown_keys_are_named():
    d = network_to_dict(intro_ring())
    d["lines"][0]["colour"] = "red"
    with pytest.raises(NetworkFormatError, match="lines\\[0\\].*colour"):
        network_from_dict(d)
    d = network_to_dict(intro_ring())
    d["extras"] = []
    with pytest.raises(NetworkFormatError, match="extras"):
        network_from_dict(d)
    d = network_to_dict(intro_ring())
    del d["source"]
    with pytest.raises(NetworkFormatError, match="source"):
        network_from_dict(d)
