import numpy as np
import pytest

from gridplan.constraints import evaluate
from gridplan.fixtures import HIGH_FEED_IN, HIGH_LOAD, intro_cases, intro_ring, lv_feeder, trail_grid, trail_rules
from gridplan.measures import (
    KINDS,
    GeometryError,
    Measure,
    MeasureCatalog,
    MeasureConflictError,
    MeasureError,
    PlanningRules,
    TransformerType,
    apply,
    discover_measures,
    reconfiguration_base,
    satisfies_dependencies,
    solution_cost,
    stub_lines,
)
from gridplan.topology import analyze_topology


def catalog_for(net, cases, rules):
    return discover_measures(net, evaluate(net, cases), rules)


LV_RULES = PlanningRules(
    enable=frozenset(KINDS) - {"open_switch", "new_line_trail"},
    transformer_types=(TransformerType("630 kVA", 0.63, 4.0, 1.0, 20000.0),
                       TransformerType("250 kVA", 0.25, 4.0, 1.2, 9000.0)),
    cabinet_cost=3000.0, substation_cost=50000.0, mv_connection_cost_per_km=100000.0,
)


def test_replace_only_on_violated_paths():
    cat = catalog_for(intro_ring(), intro_cases(), PlanningRules())
    assert cat.ids == ["REPLACE_LINE_1", "REPLACE_LINE_2", "REPLACE_LINE_3"]
    assert [cat[m].cost for m in cat.ids] == [2.0, 7.0, 3.0]


def test_replace_scope_all():
    cat = catalog_for(intro_ring(), intro_cases(), PlanningRules(replace_scope="all"))
    assert len(cat) == 6


def test_switching_catalog_has_sixteen_measures():
    rules = PlanningRules(enable=frozenset({"replace_line", "open_switch"}))
    cat = catalog_for(intro_ring(), intro_cases(), rules)
    assert len(cat) == 16
    assert sum(cat[m].kind == "open_switch" for m in cat.ids) == 10
    # the two switches of one line exclude each other
    assert cat.excluded_with("OPEN_SWITCH_2") == {"OPEN_SWITCH_3"}
    assert cat.excluded_with("OPEN_SWITCH_1") == frozenset()


def test_customer_access_threshold():
    net = lv_feeder()
    cat = catalog_for(net, [HIGH_LOAD], LV_RULES)
    targets = {cat[m].targets[0] for m in cat.ids if cat[m].kind in ("replace_line", "parallel_line",
                                                                      "new_cabinet_parallel_line")}
    assert "a2" in targets  # 60 m
    assert "a1" not in targets  # 30 m


def test_parallel_lines_only_between_cabinets():
    cat = catalog_for(lv_feeder(), [HIGH_LOAD], LV_RULES)
    par = {cat[m].targets[0] for m in cat.ids if cat[m].kind == "parallel_line"}
    assert par == {"m1"}
    newcab = {m: cat[m] for m in cat.ids if cat[m].kind == "new_cabinet_parallel_line"}
    assert {m.params["cabinet_bus"] for m in newcab.values()} == {"J1", "C2"}
    m2 = cat["NEW_CABINET_PARALLEL_LINE_m2"]
    assert m2.cost == pytest.approx(0.11 * 130 + 3000)
    # two new cabinets at the same joint are alternatives
    assert "NEW_CABINET_PARALLEL_LINE_m3" in cat.excluded_with(m2.id)


def test_parallel_requires_largest_cross_section():
    cat = catalog_for(lv_feeder(), [HIGH_LOAD], LV_RULES)
    assert cat.requires["PARALLEL_LINE_m1"] == {"REPLACE_LINE_m1_NAYY_4x240"}
    relaxed = PlanningRules(enable=LV_RULES.enable, parallel_requires_max_diameter=False)
    assert "PARALLEL_LINE_m1" not in catalog_for(lv_feeder(), [HIGH_LOAD], relaxed).requires


def test_substation_split_distance_and_cost():
    cat = catalog_for(lv_feeder(), [HIGH_LOAD], LV_RULES)
    subs = {cat[m].targets[0]: cat[m] for m in cat.ids if cat[m].kind == "new_substation_split"}
    assert set(subs) == {"K1", "K2"}
    assert subs["K1"].cost == pytest.approx(50000 + 100000 * 0.2 * 1.5)
    near = PlanningRules(enable=LV_RULES.enable, substation_min_distance_m=250.0)
    cat = catalog_for(lv_feeder(), [HIGH_LOAD], near)
    assert [m for m in cat.ids if m.startswith("NEW_SUBSTATION")] == ["NEW_SUBSTATION_K2"]


def test_geometry_required_for_substations():
    net = lv_feeder()
    net = net.replace(buses=tuple(type(b)(b.id, b.nominal_voltage, b.is_switching_cabinet) for b in net.buses))
    with pytest.raises(GeometryError):
        catalog_for(net, [HIGH_LOAD], LV_RULES)


def test_transformer_and_tap_measures():
    cat = catalog_for(lv_feeder(), [HIGH_LOAD], LV_RULES)
    assert [m for m in cat.ids if m.startswith("REPLACE_TRANSFORMER")] == ["REPLACE_TRANSFORMER_T1_630_kVA"]
    taps = [m for m in cat.ids if m.startswith("CHANGE_TAP")]
    assert len(taps) == 4
    narrow = PlanningRules(enable=frozenset({"change_tap"}), tap_range=(0, 1))
    assert catalog_for(lv_feeder(), [HIGH_LOAD], narrow).ids == ["CHANGE_TAP_T1_1"]


def test_discovered_catalog_is_consistent_and_deterministic():
    a = catalog_for(lv_feeder(), [HIGH_LOAD], LV_RULES)
    b = catalog_for(lv_feeder(), [HIGH_LOAD], LV_RULES)
    assert a.to_dict() == b.to_dict()
    assert a.problems() == []
    assert MeasureCatalog.from_dict(a.to_dict()).to_dict() == a.to_dict()


def test_apply_each_lv_measure_runs():
    net = lv_feeder()
    cat = catalog_for(net, [HIGH_LOAD], LV_RULES)
    for m in cat.ids:
        s = frozenset({m}) | cat.requires.get(m, frozenset())
        new = apply(net, s, cat)
        evaluate(new, [HIGH_LOAD])
    split = apply(net, {"NEW_SUBSTATION_K2"}, cat)
    assert split.transformer("T_K2").lv_bus == "K2"
    assert not split.line("m2").in_service
    assert analyze_topology(split).is_radial


def test_apply_is_pure_and_order_free():
    net = intro_ring()
    cat = catalog_for(net, intro_cases(), PlanningRules(enable=frozenset({"replace_line", "open_switch"})))
    s = ["REPLACE_LINE_2", "OPEN_SWITCH_4", "REPLACE_LINE_6"]
    a = apply(net, s, cat)
    b = apply(net, list(reversed(s)), cat)
    assert a == b
    assert net.line("2").std_type == "NA2XS2Y 1x95"
    assert a.line("2").std_type == "NA2XS2Y 1x240"
    assert apply(net, [], cat) is net


def test_apply_conflict():
    cat = MeasureCatalog((
        Measure("A", "change_tap", ("T1",), 0.0, {"tap_position": 1}),
        Measure("B", "change_tap", ("T1",), 0.0, {"tap_position": 2}),
    ))
    with pytest.raises(MeasureConflictError):
        apply(intro_ring(), {"A", "B"}, cat)
    with pytest.raises(MeasureError):
        apply(intro_ring(), {"C"}, cat)


def test_dependencies():
    cat = MeasureCatalog(
        (Measure("a", "replace_line", ("1",), 1.0), Measure("b", "replace_line", ("2",), 2.0),
         Measure("c", "parallel_line", ("1",), 3.0)),
        excludes=frozenset({frozenset({"a", "b"})}),
        requires={"c": frozenset({"a"})},
        at_least_one=(frozenset({"a", "b"}),),
    )
    assert satisfies_dependencies(frozenset({"a"}), cat)
    assert satisfies_dependencies(frozenset({"a", "c"}), cat)
    assert not satisfies_dependencies(frozenset({"a", "b"}), cat)
    assert not satisfies_dependencies(frozenset({"b", "c"}), cat)
    assert not satisfies_dependencies(frozenset(), cat)
    assert solution_cost({"a", "c"}, cat) == 4.0


def test_catalog_problems():
    cat = MeasureCatalog((Measure("a", "replace_line", ("1",), 1.0),), requires={"a": frozenset({"zz"})},
                         at_least_one=(frozenset(),))
    assert len(cat.problems()) == 2
    with pytest.raises(MeasureError):
        MeasureCatalog((Measure("a", "replace_line", ("1",), 1.0),) * 2)
    with pytest.raises(MeasureError):
        Measure("a", "teleport", (), 1.0)
    with pytest.raises(MeasureError):
        Measure("a", "replace_line", (), -1.0)


def test_reconfiguration_base_closes_switchable():
    net = intro_ring()
    cat = catalog_for(net, intro_cases(), PlanningRules(enable=frozenset({"replace_line", "open_switch"})))
    base = reconfiguration_base(net, cat)
    assert all(s.closed for s in base.switches)
    assert reconfiguration_base(net, MeasureCatalog()) is net


def test_stubs_and_trails():
    net = trail_grid()
    assert stub_lines(net) == {ln.id for ln in net.lines}
    loops = {"D1": "B1"}
    assert stub_lines(net, loops.items()) == {ln.id for ln in net.lines} - {"a1", "d1", "b1"}
    cat = catalog_for(net, [HIGH_LOAD], trail_rules())
    trails = [m for m in cat.ids if cat[m].kind == "new_line_trail"]
    assert cat["NEW_TRAIL_D1_B1"].params["length"] == pytest.approx(1.5)
    assert len(trails) == 3
    assert len(cat.at_least_one) == 3
    assert "OPEN_SWITCH_sw_b2" not in cat


def test_decommission_needs_an_option():
    rules = PlanningRules(enable=frozenset({"replace_line"}), decommission_lines=("1",))
    cat = catalog_for(intro_ring(), intro_cases(), rules)
    assert cat.at_least_one == (frozenset({"REPLACE_LINE_1_NA2XS2Y_1x95", "REPLACE_LINE_1_NA2XS2Y_1x240"}),)


def test_rules_json_roundtrip(tmp_path):
    rules = trail_rules()
    again = PlanningRules.from_dict(rules.to_dict())
    assert again == rules
    with pytest.raises(MeasureError, match="bogus"):
        PlanningRules.from_dict({"bogus": 1})
    with pytest.raises(MeasureError):
        PlanningRules(enable=frozenset({"magic"}))


def test_feed_in_switching_changes_voltage():
    rules = PlanningRules(enable=frozenset({"replace_line", "open_switch"}))
    net = intro_ring()
    cat = catalog_for(net, intro_cases(), rules)
    base = reconfiguration_base(net, cat)
    rep = evaluate(apply(base, {"OPEN_SWITCH_4", "REPLACE_LINE_6"}, cat), [HIGH_FEED_IN])
    assert rep.lp_vv == 0 and rep.lp_mf == 0
    assert np.isfinite(solution_cost(cat.ids, cat))
