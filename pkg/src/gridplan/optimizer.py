"""Stochastic local search over measure subsets.

All algorithms share one neighbourhood function and the lexicographic
extended cost. Evaluations are cached per search by solution; only cache
misses consume the evaluation budget and produce trace records.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np

from .constraints import ConstraintReport, CostTuple, evaluate, extended_cost
from .measures import (
    MeasureCatalog,
    PlanningRules,
    apply,
    discover_measures,
    reconfiguration_base,
    satisfies_dependencies,
    solution_cost,
)
from .network import Network
from .powerflow import LoadCase

EXHAUSTIVE_LIMIT = 24


class SearchError(RuntimeError):
    pass


class BudgetExhausted(Exception):
    """Raised inside a search when the next fresh evaluation would exceed the budget."""


@dataclass(frozen=True)
class NeighborhoodMode:
    allow_add: bool = True
    allow_remove: bool = True
    allow_exchange: bool = False

    def __post_init__(self):
        if not (self.allow_add or self.allow_remove or self.allow_exchange):
            raise ValueError("neighbourhood needs at least one move type")


ADD_REMOVE = NeighborhoodMode(True, True, False)
ADD_REMOVE_EXCHANGE = NeighborhoodMode(True, True, True)


@dataclass(frozen=True)
class SearchConfig:
    algorithm: str = "ils"  # hc | ils | lahc
    mode: NeighborhoodMode = ADD_REMOVE
    evaluation_budget: int = 5000
    stop_after_no_improvement: int = 1000
    perturbation_strength: int = 4
    lahc_history_length: int = 50
    rng_seed: int = 0
    # cap on cache hits + misses, keeps searches finite once the reachable region is cached
    max_lookups_factor: int = 10

    def __post_init__(self):
        if self.algorithm not in ("hc", "ils", "lahc"):
            raise ValueError(f"unknown algorithm {self.algorithm!r}")
        if self.evaluation_budget <= 0:
            raise ValueError("evaluation_budget must be positive")
        if self.perturbation_strength < 0:
            raise ValueError("perturbation_strength must be non-negative")
        if self.lahc_history_length < 1:
            raise ValueError("lahc_history_length must be at least 1")

    def with_(self, **changes) -> "SearchConfig":
        from dataclasses import replace

        return replace(self, **changes)

    def to_dict(self) -> dict:
        return {
            "algorithm": self.algorithm,
            "mode": {"add": self.mode.allow_add, "remove": self.mode.allow_remove,
                     "exchange": self.mode.allow_exchange},
            "evaluation_budget": self.evaluation_budget,
            "stop_after_no_improvement": self.stop_after_no_improvement,
            "perturbation_strength": self.perturbation_strength,
            "lahc_history_length": self.lahc_history_length,
            "rng_seed": self.rng_seed,
            "max_lookups_factor": self.max_lookups_factor,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "SearchConfig":
        d = dict(d)
        m = d.pop("mode", None)
        if m is not None:
            d["mode"] = NeighborhoodMode(m.get("add", True), m.get("remove", True), m.get("exchange", False))
        return cls(**d)


NAMED_CONFIGS = {
    "HC": SearchConfig(algorithm="hc"),
    "ILS_4_HC": SearchConfig(algorithm="ils", mode=ADD_REMOVE, perturbation_strength=4),
    "ILS_4_HC_AE": SearchConfig(algorithm="ils", mode=ADD_REMOVE_EXCHANGE, perturbation_strength=4),
    "LAHC_50": SearchConfig(algorithm="lahc", mode=ADD_REMOVE, lahc_history_length=50),
}
ALGORITHM_ALIASES = {"hc": "HC", "ils": "ILS_4_HC", "ils_ae": "ILS_4_HC_AE", "lahc": "LAHC_50"}


# ---------------------------------------------------------------------------
# trace


@dataclass(frozen=True)
class TraceRecord:
    eval: int
    cost: CostTuple  # of the current solution after the acceptance decision
    event: str  # step | perturbation | restart
    best: CostTuple

    def to_dict(self) -> dict:
        return {"eval": self.eval, "level": int(self.cost.level), "magnitude": float(self.cost.magnitude),
                "event": self.event, "best_level": int(self.best.level),
                "best_magnitude": float(self.best.magnitude)}


@dataclass
class SearchTrace:
    records: list[TraceRecord] = field(default_factory=list)
    best_solution: frozenset = frozenset()
    best_cost: CostTuple | None = None
    final_cost: CostTuple | None = None
    evaluations: int = 0
    lookups: int = 0

    def to_jsonl(self) -> str:
        return "".join(json.dumps(r.to_dict()) + "\n" for r in self.records)

    def write(self, path: str | Path) -> None:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(self.to_jsonl(), encoding="utf-8")

    def segments(self) -> list[list[TraceRecord]]:
        """Split records at perturbation/restart events."""
        out: list[list[TraceRecord]] = []
        for r in self.records:
            if not out or r.event != "step":
                out.append([])
            out[-1].append(r)
        return out


# ---------------------------------------------------------------------------
# problem and evaluation


def evaluate_solution(base: Network, solution, catalog: MeasureCatalog, cases: list[LoadCase],
                      check: bool = False) -> CostTuple:
    s = frozenset(solution)
    report = evaluate(apply(base, s, catalog), cases, check=check)
    return extended_cost(report, solution_cost(s, catalog))


@dataclass
class PlanningProblem:
    """A base network, its measure catalog and the load cases to satisfy."""

    base: Network
    catalog: MeasureCatalog
    cases: list[LoadCase]
    initial_report: ConstraintReport | None = None

    @classmethod
    def from_network(cls, network: Network, cases: list[LoadCase], rules: PlanningRules) -> "PlanningProblem":
        report = evaluate(network, cases)
        catalog = discover_measures(network, report, rules)
        return cls(reconfiguration_base(network, catalog), catalog, list(cases), report)

    def cost(self, solution) -> CostTuple:
        return evaluate_solution(self.base, solution, self.catalog, self.cases)


class Evaluator:
    """Counts, caches and traces cost evaluations for one search.

    ``memo`` may be a dict shared between searches on the same problem; it
    only saves recomputation and does not change budget accounting.
    """

    def __init__(self, problem: PlanningProblem, budget: int | None = None,
                 memo: dict | None = None, max_lookups: int | None = None):
        self.problem = problem
        self.budget = budget
        self.memo = memo
        self.max_lookups = max_lookups
        self.cache: dict[frozenset, CostTuple] = {}
        self.count = 0
        self.lookups = 0
        self.trace = SearchTrace()
        self._pending = "restart"
        self.best: tuple[CostTuple, frozenset] | None = None

    def __call__(self, s: frozenset) -> tuple[CostTuple, bool]:
        self.lookups += 1
        if self.max_lookups is not None and self.lookups > self.max_lookups:
            raise BudgetExhausted
        hit = self.cache.get(s)
        if hit is not None:
            return hit, False
        if self.budget is not None and self.count >= self.budget:
            raise BudgetExhausted
        c = None if self.memo is None else self.memo.get(s)
        if c is None:
            c = self.problem.cost(s)
            if self.memo is not None:
                self.memo[s] = c
        self.count += 1
        self.cache[s] = c
        if self.best is None or _better(c, s, *self.best):
            self.best = (c, s)
        return c, True

    def mark(self, event: str) -> None:
        self._pending = event

    def observe(self, fresh: bool, current: CostTuple) -> None:
        """Record the current cost after a decision that followed a fresh evaluation."""
        if not fresh:
            return
        self.trace.records.append(TraceRecord(self.count, current, self._pending, self.best[0]))
        self._pending = "step"

    def finish(self, final: frozenset | None = None) -> SearchTrace:
        t = self.trace
        if final is not None:
            t.final_cost = self.cache.get(final)
        t.evaluations = self.count
        t.lookups = self.lookups
        if self.best is not None:
            t.best_cost, t.best_solution = self.best
        return t


def _key(s: frozenset):
    return (len(s), sorted(s))


def _better(c1: CostTuple, s1: frozenset, c2: CostTuple, s2: frozenset) -> bool:
    """Strict lexicographic cost order, ties broken by size then sorted member ids."""
    if c1 != c2:
        return c1 < c2
    return _key(s1) < _key(s2)


# ---------------------------------------------------------------------------
# neighbourhood and moves


def neighbourhood(solution: frozenset, catalog: MeasureCatalog, mode: NeighborhoodMode) -> list[frozenset]:
    """Dependency-respecting one-edit neighbours, in a deterministic order.

    When ``solution`` itself satisfies the dependencies only the constraints
    touched by the edit are re-checked; otherwise every candidate gets the
    full check.
    """
    s = frozenset(solution)
    inside = [m for m in catalog.ids if m in s]
    outside = [m for m in catalog.ids if m not in s]
    if not satisfies_dependencies(s, catalog):
        out = []
        if mode.allow_remove:
            out.extend(s - {m} for m in inside)
        if mode.allow_add:
            out.extend(s | {m} for m in outside)
        if mode.allow_exchange:
            out.extend((s - {a}) | {b} for a in inside for b in outside)
        return [n for n in out if satisfies_dependencies(n, catalog)]

    req = catalog.requires
    required_by, groups_of = _reverse_dependencies(catalog)
    empty = frozenset()

    def can_add(m, rest):
        return not (catalog.excluded_with(m) & rest) and req.get(m, empty) <= rest | {m}

    def can_drop(m, rest):
        if required_by.get(m, empty) & rest:
            return False
        return all(g & rest for g in groups_of.get(m, ()))

    out = []
    if mode.allow_remove:
        for m in inside:
            rest = s - {m}
            if can_drop(m, rest):
                out.append(rest)
    if mode.allow_add:
        for m in outside:
            if can_add(m, s):
                out.append(s | {m})
    if mode.allow_exchange:
        for a in inside:
            rest = s - {a}
            for b in outside:
                new = rest | {b}
                if can_add(b, rest) and can_drop(a, new):
                    out.append(new)
    return out


def _reverse_dependencies(catalog: MeasureCatalog):
    """(measure -> measures requiring it, measure -> at-least-one groups containing it)."""
    cached = catalog.__dict__.get("_reverse")
    if cached is None:
        rb: dict[str, set] = {}
        for m, reqs in catalog.requires.items():
            for r in reqs:
                rb.setdefault(r, set()).add(m)
        go: dict[str, list] = {}
        for g in catalog.at_least_one:
            for m in g:
                go.setdefault(m, []).append(g)
        cached = ({k: frozenset(v) for k, v in rb.items()}, go)
        object.__setattr__(catalog, "_reverse", cached)
    return cached


def initial_solution(catalog: MeasureCatalog) -> frozenset:
    """The empty solution, greedily repaired to satisfy requires/at-least-one groups."""
    s: set[str] = set()

    def add(m: str):
        if m in s:
            return
        s.add(m)
        for r in sorted(catalog.requires.get(m, ())):
            add(r)

    for group in catalog.at_least_one:
        if group & s:
            continue
        options = sorted(group, key=lambda m: (catalog[m].cost, m))
        for m in options:
            if not (catalog.excluded_with(m) & s):
                add(m)
                break
    sol = frozenset(s)
    if not satisfies_dependencies(sol, catalog):
        raise SearchError("could not construct a dependency-satisfying start solution")
    return sol


def random_neighbour(s: frozenset, catalog: MeasureCatalog, mode: NeighborhoodMode,
                     rng: np.random.Generator, tries: int = 64) -> frozenset | None:
    """A uniformly drawn dependency-respecting neighbour, or None if there is none.

    Draws raw one-edit moves uniformly and rejects invalid ones, which is
    uniform over the valid neighbours; falls back to full enumeration.
    """
    ids = catalog.ids
    inside = [m for m in ids if m in s]
    outside = [m for m in ids if m not in s]
    n_rm = len(inside) if mode.allow_remove else 0
    n_add = len(outside) if mode.allow_add else 0
    n_ex = len(inside) * len(outside) if mode.allow_exchange else 0
    total = n_rm + n_add + n_ex
    if total == 0:
        return None
    if satisfies_dependencies(s, catalog):
        for _ in range(tries):
            k = int(rng.integers(total))
            if k < n_rm:
                cand = s - {inside[k]}
            elif k < n_rm + n_add:
                cand = s | {outside[k - n_rm]}
            else:
                a, b = divmod(k - n_rm - n_add, len(outside))
                cand = (s - {inside[a]}) | {outside[b]}
            if satisfies_dependencies(cand, catalog):
                return cand
    nbrs = neighbourhood(s, catalog, mode)
    if not nbrs:
        return None
    return nbrs[int(rng.integers(len(nbrs)))]


def perturbate(s: frozenset, strength: int, catalog: MeasureCatalog, mode: NeighborhoodMode,
               rng: np.random.Generator) -> frozenset:
    """Apply ``strength`` random neighbourhood moves without evaluating anything."""
    for _ in range(strength):
        nxt = random_neighbour(s, catalog, mode, rng)
        if nxt is None:
            break
        s = nxt
    return s


# ---------------------------------------------------------------------------
# algorithms


def _hill_climb(s0: frozenset, ev: Evaluator, mode: NeighborhoodMode, rng) -> tuple[frozenset, CostTuple, bool]:
    """Random-order first-improvement descent. Returns (solution, cost, budget_exhausted)."""
    catalog = ev.problem.catalog
    try:
        cost, fresh = ev(s0)
    except BudgetExhausted:
        return s0, None, True
    cur = s0
    ev.observe(fresh, cost)
    while True:
        nbrs = neighbourhood(cur, catalog, mode)
        improved = False
        for i in rng.permutation(len(nbrs)):
            cand = nbrs[int(i)]
            try:
                cc, fresh = ev(cand)
            except BudgetExhausted:
                return cur, cost, True
            if cc < cost:
                cur, cost = cand, cc
                improved = True
            ev.observe(fresh, cost)
            if improved:
                break
        if not improved:
            return cur, cost, False


def _context(problem: PlanningProblem, config: SearchConfig, memo):
    max_lookups = config.evaluation_budget * config.max_lookups_factor
    ev = Evaluator(problem, config.evaluation_budget, memo, max_lookups)
    rng = np.random.default_rng(config.rng_seed)
    return ev, rng


def hill_climbing(problem: PlanningProblem, s0: frozenset | None = None, config: SearchConfig = SearchConfig("hc"),
                  memo: dict | None = None) -> tuple[frozenset, SearchTrace]:
    ev, rng = _context(problem, config, memo)
    s0 = initial_solution(problem.catalog) if s0 is None else frozenset(s0)
    sol, _, _ = _hill_climb(s0, ev, config.mode, rng)
    return sol, ev.finish(sol)


def iterated_local_search(problem: PlanningProblem, s0: frozenset | None = None,
                          config: SearchConfig = SearchConfig("ils"),
                          memo: dict | None = None) -> tuple[frozenset, SearchTrace]:
    ev, rng = _context(problem, config, memo)
    catalog = problem.catalog
    s0 = initial_solution(catalog) if s0 is None else frozenset(s0)
    best, best_cost, done = _hill_climb(s0, ev, config.mode, rng)
    if best_cost is None:
        return s0, ev.finish(s0)
    stale = 0
    while not done and stale < config.stop_after_no_improvement:
        s1 = perturbate(best, config.perturbation_strength, catalog, config.mode, rng)
        ev.mark("perturbation")
        s2, c2, done = _hill_climb(s1, ev, config.mode, rng)
        if c2 is not None and c2 < best_cost:
            best, best_cost = s2, c2
            stale = 0
        else:
            stale += 1
    return best, ev.finish(best)


def late_acceptance_hc(problem: PlanningProblem, s0: frozenset | None = None,
                       config: SearchConfig = SearchConfig("lahc"),
                       memo: dict | None = None) -> tuple[frozenset, SearchTrace]:
    ev, rng = _context(problem, config, memo)
    catalog = problem.catalog
    s0 = initial_solution(catalog) if s0 is None else frozenset(s0)
    L = config.lahc_history_length
    best = s0
    best_cost = None
    try:
        while True:
            cur = s0
            cost, fresh = ev(cur)
            ev.observe(fresh, cost)
            if best_cost is None or cost < best_cost:
                best, best_cost = cur, cost
            history = [cost] * L
            run_best = cost
            since = 0
            k = 0
            while since < 2 * L:
                cand = random_neighbour(cur, catalog, config.mode, rng)
                if cand is None:
                    raise BudgetExhausted
                cc, fresh = ev(cand)
                v = k % L
                if cc < history[v] or cc < cost:
                    cur, cost = cand, cc
                    history[v] = cc
                ev.observe(fresh, cost)
                k += 1
                if cost < run_best:
                    run_best = cost
                    since = 0
                else:
                    since += 1
                if cost < best_cost:
                    best, best_cost = cur, cost
            ev.mark("restart")
    except BudgetExhausted:
        pass
    return best, ev.finish(best)


def exhaustive_search(problem: PlanningProblem, memo: dict | None = None,
                      limit: int = EXHAUSTIVE_LIMIT) -> tuple[frozenset, CostTuple]:
    """Global optimum over all dependency-satisfying subsets.

    Ties are broken by solution size, then by the sorted member ids.
    """
    catalog = problem.catalog
    n = len(catalog)
    if n > limit:
        raise SearchError(f"exhaustive search limited to {limit} measures, catalog has {n}")
    ev = Evaluator(problem, budget=None, memo=memo)
    for s in enumerate_solutions(catalog):
        ev(s)
    if ev.best is None:
        raise SearchError("no dependency-satisfying solution exists")
    cost, sol = ev.best
    return sol, cost


def enumerate_solutions(catalog: MeasureCatalog):
    """Yield every dependency-satisfying subset; pairwise excludes prune the recursion."""
    ids = catalog.ids

    def rec(i: int, chosen: list[str], banned: frozenset):
        if i == len(ids):
            s = frozenset(chosen)
            if satisfies_dependencies(s, catalog):
                yield s
            return
        yield from rec(i + 1, chosen, banned)
        m = ids[i]
        if m not in banned:
            chosen.append(m)
            yield from rec(i + 1, chosen, banned | catalog.excluded_with(m))
            chosen.pop()

    yield from rec(0, [], frozenset())


_ALGORITHMS: dict[str, Callable] = {
    "hc": hill_climbing,
    "ils": iterated_local_search,
    "lahc": late_acceptance_hc,
}


@dataclass
class SearchResult:
    solution: frozenset
    cost: CostTuple
    trace: SearchTrace | None
    config: SearchConfig | None = None

    def to_dict(self, catalog: MeasureCatalog) -> dict:
        return {
            "measures": [catalog[m].to_dict() for m in catalog.ids if m in self.solution],
            "total_cost": solution_cost(self.solution, catalog),
            "cost": self.cost.to_dict(),
            "evaluations": self.trace.evaluations if self.trace else None,
        }


def resolve_config(name: str, seed: int = 0, budget: int | None = None) -> SearchConfig:
    key = ALGORITHM_ALIASES.get(name, name)
    if key not in NAMED_CONFIGS:
        raise ValueError(f"unknown algorithm configuration {name!r}")
    cfg = NAMED_CONFIGS[key].with_(rng_seed=seed)
    if budget is not None:
        cfg = cfg.with_(evaluation_budget=budget)
    return cfg


def run_search(problem: PlanningProblem, config: SearchConfig, s0: frozenset | None = None,
               memo: dict | None = None) -> SearchResult:
    sol, trace = _ALGORITHMS[config.algorithm](problem, s0, config, memo)
    cost = trace.final_cost if trace.final_cost is not None else problem.cost(sol)
    return SearchResult(sol, cost, trace, config)


