"""Topology optimisation: decommission old cables and close new trails.

Run with ``python gallery/g04_line_trails.py``.
"""
from gridplan import PlanningProblem, analyze_topology, apply, evaluate, extended_cost
from gridplan.fixtures import trail_cases, trail_grid, trail_rules
from gridplan.optimizer import exhaustive_search

net = trail_grid()
cases = trail_cases()
print(f"baseline renewal: {sum(net.line(l).length for l in trail_rules().decommission_lines):.1f} km")

problem = PlanningProblem.from_network(net, cases, trail_rules())
for mid in problem.catalog.ids:
    m = problem.catalog[mid]
    print(f"  {mid:40s} {m.kind:16s} {m.cost:6.2f}")

sol, cost = exhaustive_search(problem)
print("optimum:", sorted(sol), cost)

planned = apply(problem.base, sol, problem.catalog)
print("radial after planning:", analyze_topology(planned).is_radial)
print("check:", extended_cost(evaluate(planned, cases), cost.magnitude))
