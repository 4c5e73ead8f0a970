"""Measure discovery on a small low-voltage feeder.

Run with ``python gallery/g05_lv_discovery.py``. Shows which measures the
rules generate and how they depend on each other.
"""
from gridplan import PlanningRules, discover_measures, evaluate
from gridplan.fixtures import HIGH_LOAD, lv_feeder
from gridplan.measures import KINDS, TransformerType

rules = PlanningRules(
    enable=frozenset(KINDS) - {"open_switch", "new_line_trail"},
    transformer_types=(TransformerType("630 kVA", 0.63, 4.0, 1.0, 20000.0),),
    cabinet_cost=3000.0, substation_cost=50000.0, mv_connection_cost_per_km=100000.0,
)
net = lv_feeder()
report = evaluate(net, [HIGH_LOAD])
print("overloaded lines:", sorted(report.overloaded_lines), "voltage violations:", sorted(report.voltage_violations))

catalog = discover_measures(net, report, rules)
for mid in catalog.ids:
    print(f"  {mid:40s} {catalog[mid].cost:10.1f}")
print("requires:")
for mid, req in sorted(catalog.requires.items()):
    print(f"  {mid} -> {sorted(req)}")
print("exclusive pairs:", len(catalog.excludes))
