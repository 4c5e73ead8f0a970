"""Probabilistic PV study: conservative against progressive expansion.

Run with ``python gallery/g03_res_study.py``. Both studies share a master
seed so the sampled installations are paired.
"""
from gridplan import SearchConfig
from gridplan.fixtures import intro_cases, ring_rules, ring_scenarios, ring_study_base
from gridplan.scenarios import aggregate, run_study, summary_csv

base = ring_study_base()
search = SearchConfig("ils", evaluation_budget=500)
results = [
    run_study(base, sc, ring_rules(), intro_cases(), search, n_samples=20, master_seed=7)
    for sc in ring_scenarios()
]
print(summary_csv(aggregate(results)), end="")

for r in results:
    needed = [rec for rec in r.records if rec.needed]
    print(f"{r.name}: {len(needed)} of {len(r.records)} samples needed reinforcement")
