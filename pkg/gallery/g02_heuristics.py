"""Compare the three metaheuristic configurations against the exhaustive optimum.

Run with ``python gallery/g02_heuristics.py``. Each configuration runs ten
seeds with a small budget; a shared memo keeps the runs fast.
"""
import numpy as np

from gridplan import PlanningProblem, PlanningRules, run_search
from gridplan.fixtures import intro_cases, intro_ring
from gridplan.optimizer import exhaustive_search, resolve_config

rules = PlanningRules(enable=frozenset({"replace_line", "open_switch"}))
problem = PlanningProblem.from_network(intro_ring(), intro_cases(), rules)
print("catalog size:", len(problem.catalog))

memo = {}
_, optimum = exhaustive_search(problem, memo=memo)
print("optimum:", optimum)

for name in ("ILS_4_HC", "ILS_4_HC_AE", "LAHC_50"):
    costs, evals = [], []
    for seed in range(10):
        res = run_search(problem, resolve_config(name, seed=seed, budget=2000), memo=memo)
        costs.append(res.cost.magnitude if res.cost.level == 0 else np.inf)
        evals.append(res.trace.evaluations)
    costs = np.array(costs)
    hit = np.isclose(costs, optimum.magnitude).mean()
    print(f"{name:12s} optimum rate {hit:.0%}  median cost {np.median(costs):g}  mean evals {np.mean(evals):.0f}")
