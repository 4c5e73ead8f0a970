import csv
import io
import json
import math

import numpy as np
import pytest

from gridplan.fixtures import intro_cases, ring_rules, ring_scenarios, ring_study_base
from gridplan.optimizer import resolve_config
from gridplan.scenarios import (
    ResScenario,
    SampleRecord,
    ScenarioError,
    StudyResult,
    aggregate,
    revalidate,
    run_study,
    sample_res,
    sample_seeds,
    summarize,
    summary_csv,
)
from gridplan.constraints import CostTuple

SEARCH = resolve_config("ils", 0, 300)


def pv_by_bus(net):
    out = {}
    for g in net.generators:
        out[g.bus] = out.get(g.bus, 0.0) + g.active_power
    return out


def test_zero_capacity_is_identity():
    base = ring_study_base()
    assert sample_res(base, ResScenario("none", 0.0), 1) is base


def test_sampling_is_deterministic_and_total_preserving():
    base = ring_study_base()
    sc = ResScenario("s", 7.3, unit_size_range=(0.1, 0.5))
    a, b = sample_res(base, sc, 5), sample_res(base, sc, 5)
    assert a == b
    installs = [pv_by_bus(sample_res(base, sc, seed)) for seed in range(50)]
    for inst in installs:
        assert math.fsum(inst.values()) == pytest.approx(7.3, abs=1e-9)
        assert set(inst) <= base.load_points
    assert len({tuple(sorted(i.items())) for i in installs}) == 50


def test_weighted_placement_respects_potential():
    base = ring_study_base()
    sc = ResScenario("w", 3.0, placement_rule="weighted_by_potential", unit_size_range=(0.1, 0.4),
                     potential={"LP1": 2.0, "LP5": 1.5})
    for seed in range(20):
        inst = pv_by_bus(sample_res(base, sc, seed))
        assert set(inst) <= {"LP1", "LP5"}
        assert inst.get("LP1", 0) <= 2.0 + 1e-12 and inst.get("LP5", 0) <= 1.5 + 1e-12
        assert math.fsum(inst.values()) == pytest.approx(3.0)


def test_unplaceable_capacity():
    sc = ResScenario("w", 5.0, placement_rule="weighted_by_potential", potential={"LP1": 1.0})
    with pytest.raises(ScenarioError):
        sample_res(ring_study_base(), sc, 0)


def test_power_factor_absorbs_reactive_power():
    net = sample_res(ring_study_base(), ResScenario("pf", 1.0, power_factor=0.95), 0)
    for g in net.generators:
        assert g.reactive_power == pytest.approx(-g.active_power * math.tan(math.acos(0.95)))


def test_scenario_validation_and_roundtrip():
    with pytest.raises(ScenarioError):
        ResScenario("x", -1.0)
    with pytest.raises(ScenarioError):
        ResScenario("x", 1.0, unit_size_range=(0.0, 1.0))
    with pytest.raises(ScenarioError):
        ResScenario("x", 1.0, placement_rule="random")
    with pytest.raises(ScenarioError):
        ResScenario.from_dict({"name": "x", "total_capacity": 1.0, "colour": 1})
    sc = ring_scenarios()[1]
    assert ResScenario.from_dict(json.loads(json.dumps(sc.to_dict()))) == sc


def test_load_scale_hook():
    net = sample_res(ring_study_base(), ResScenario("ev", 0.0, load_scale=2.0), 0)
    assert net.loads[0].active_power == pytest.approx(0.8)


def test_seed_splitting_rule():
    seeds = sample_seeds(99, 5)
    child = np.random.SeedSequence(99).spawn(5)[3]
    assert seeds[3] == tuple(int(x) for x in child.generate_state(2))
    assert sample_seeds(99, 8)[:5] == seeds


def test_feasible_sample_records_zero_cost():
    r = run_study(ring_study_base(), ResScenario("tiny", 0.5), ring_rules(), intro_cases(), SEARCH, 3, 1)
    for rec in r.records:
        assert rec.cost == (0, 0.0) and rec.solution == () and not rec.needed


def test_single_sample_statistics_degenerate():
    r = run_study(ring_study_base(), ring_scenarios()[1], ring_rules(), intro_cases(), SEARCH, 1, 3)
    s = r.summary
    assert s["n"] == 1
    assert s["min"] == s["q25"] == s["median"] == s["q75"] == s["max"] == r.records[0].cost.magnitude


@pytest.fixture(scope="module")
def study():
    return run_study(ring_study_base(), ring_scenarios()[1], ring_rules(), intro_cases(), SEARCH, 12, 2024)


def test_order_and_workers_do_not_matter(study):
    base, sc = ring_study_base(), ring_scenarios()[1]
    perm = list(np.random.default_rng(0).permutation(12))
    shuffled = run_study(base, sc, ring_rules(), intro_cases(), SEARCH, 12, 2024, order=perm)
    pooled = run_study(base, sc, ring_rules(), intro_cases(), SEARCH, 12, 2024, workers=2)
    assert shuffled.records == study.records == pooled.records
    assert shuffled.records_json() == study.records_json() == pooled.records_json()


def test_solutions_revalidate(study):
    assert all(r.feasible for r in study.records)
    assert revalidate(study, ring_study_base(), ring_scenarios()[1], ring_rules(), intro_cases()) == []


def test_summary_matches_recomputation(study):
    costs = sorted(r.cost.magnitude for r in study.records if r.feasible)
    n = len(costs)

    def quantile(q):  # linear interpolation between order statistics
        h = (n - 1) * q
        lo = math.floor(h)
        return costs[lo] + (h - lo) * (costs[min(lo + 1, n - 1)] - costs[lo])

    s = study.summary
    for key, q in (("min", 0), ("q25", 0.25), ("median", 0.5), ("q75", 0.75), ("max", 1)):
        assert s[key] == pytest.approx(quantile(q), rel=1e-12, abs=1e-12)
    assert s["mean"] == pytest.approx(math.fsum(costs) / n, rel=1e-12)
    assert 0 <= s["feasibility_rate"] <= 1


def test_failures_are_recorded_not_raised():
    sc = ResScenario("bad", 1.0, placement_rule="weighted_by_potential", potential={"NOWHERE": 5.0})
    r = run_study(ring_study_base(), sc, ring_rules(), intro_cases(), SEARCH, 3, 0)
    assert all(rec.error and rec.cost is None for rec in r.records)
    assert r.summary["feasibility_rate"] == 0.0
    assert math.isnan(r.summary["median"])


def test_infeasible_samples_excluded_from_statistics():
    recs = [SampleRecord(0, 1, 2, True, CostTuple(0, 4.0), ("a",), 10),
            SampleRecord(1, 1, 2, True, CostTuple(2, 99.0), (), 10)]
    s = summarize("x", recs)
    assert s["feasibility_rate"] == 0.5 and s["max"] == 4.0 and s["need_rate"] == 1.0


def test_aggregate_and_csv(study):
    with pytest.raises(ValueError):
        aggregate([])
    rows = aggregate([study])
    assert rows == [study.summary]
    parsed = list(csv.DictReader(io.StringIO(summary_csv(rows))))
    assert parsed[0]["study"] == "progressive" and int(parsed[0]["n"]) == 12


def test_dominating_scenario_has_higher_median():
    a = StudyResult("a", [SampleRecord(i, 0, 0, True, CostTuple(0, float(c)), (), 0) for i, c in enumerate([1, 5, 2, 7])])
    b = StudyResult("b", [SampleRecord(i, 0, 0, True, CostTuple(0, float(c) + 1), (), 0) for i, c in enumerate([1, 5, 2, 7])])
    ra, rb = aggregate([a, b])
    assert rb["median"] >= ra["median"]
