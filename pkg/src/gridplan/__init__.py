"""Automated distribution network planning with stochastic local search."""
from .constraints import ConstraintReport, CostTuple, compare, evaluate, extended_cost
from .measures import (
    Measure,
    MeasureCatalog,
    PlanningRules,
    apply,
    discover_measures,
    reconfiguration_base,
    satisfies_dependencies,
    solution_cost,
)
from .network import Network, load_network, save_network, validate
from .optimizer import (
    NAMED_CONFIGS,
    NeighborhoodMode,
    PlanningProblem,
    SearchConfig,
    evaluate_solution,
    exhaustive_search,
    hill_climbing,
    iterated_local_search,
    late_acceptance_hc,
    neighbourhood,
    perturbate,
    run_search,
)
from .powerflow import LoadCase, run_load_flow, worst_case_results
from .topology import analyze_topology, path_to_source

__version__ = "0.1.0"
