"""Introductory ring: find the violation, discover measures, compare the two catalogs.

Run with ``python gallery/g01_intro_ring.py``.
"""
from gridplan import PlanningProblem, PlanningRules, analyze_topology, evaluate, extended_cost, run_load_flow
from gridplan.fixtures import HIGH_FEED_IN, intro_cases, intro_ring
from gridplan.optimizer import exhaustive_search

net = intro_ring()
topo = analyze_topology(net)
print("radial:", topo.is_radial, "feeders:", len(topo.feeders))

# high feed-in pushes the far end of the ring above the upper voltage band
res = run_load_flow(net, HIGH_FEED_IN)
for bus in sorted(net.load_points):
    print(f"  {bus}: {res.bus_voltage[bus]:.4f} pu")

report = evaluate(net, intro_cases())
print("violations:", sorted(report.voltage_violations), "cost", extended_cost(report, 0.0))

# cable replacement alone
replace_only = PlanningProblem.from_network(net, intro_cases(), PlanningRules(enable=frozenset({"replace_line"})))
sol, cost = exhaustive_search(replace_only)
print("replace only:", sorted(sol), cost)

# replacement plus moving the sectioning point
switching = PlanningProblem.from_network(
    net, intro_cases(), PlanningRules(enable=frozenset({"replace_line", "open_switch"}))
)
sol, cost = exhaustive_search(switching)
print("with switching:", sorted(sol), cost)
