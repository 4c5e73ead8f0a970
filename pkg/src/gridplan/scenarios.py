"""Probabilistic RES scenarios and batch planning studies.

Sample ``i`` of a study draws its seeds from
``numpy.random.SeedSequence(master_seed).spawn(n)[i]``: the first 32-bit word
of its state seeds the PV placement, the second seeds the search. Samples are
therefore independent of execution order and worker count.
"""
from __future__ import annotations

import csv
import io
import json
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .constraints import CostTuple, evaluate, extended_cost
from .measures import PlanningRules
from .network import Load, Network
from .optimizer import PlanningProblem, SearchConfig, exhaustive_search, run_search
from .powerflow import LoadCase


class ScenarioError(ValueError):
    pass


@dataclass(frozen=True)
class ResScenario:
    name: str
    total_capacity: float  # MW
    placement_rule: str = "uniform_over_load_points"  # or weighted_by_potential
    unit_size_range: tuple[float, float] = (0.01, 0.03)
    power_factor: float = 1.0
    potential: dict = field(default_factory=dict, hash=False)  # bus -> MW
    load_scale: float = 1.0

    def __post_init__(self):
        if self.total_capacity < 0:
            raise ScenarioError("total_capacity must be non-negative")
        lo, hi = self.unit_size_range
        if not 0 < lo <= hi:
            raise ScenarioError("unit sizes must satisfy 0 < min <= max")
        if self.placement_rule not in ("uniform_over_load_points", "weighted_by_potential"):
            raise ScenarioError(f"unknown placement rule {self.placement_rule!r}")
        if not 0 < self.power_factor <= 1:
            raise ScenarioError("power_factor must be in (0, 1]")
        if self.load_scale < 0:
            raise ScenarioError("load_scale must be non-negative")

    @classmethod
    def from_dict(cls, d: dict) -> "ResScenario":
        d = dict(d)
        if "unit_size_range" in d:
            d["unit_size_range"] = tuple(d["unit_size_range"])
        try:
            return cls(**d)
        except TypeError as exc:
            raise ScenarioError(str(exc)) from None

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "total_capacity": self.total_capacity,
            "placement_rule": self.placement_rule,
            "unit_size_range": list(self.unit_size_range),
            "power_factor": self.power_factor,
            "potential": dict(self.potential),
            "load_scale": self.load_scale,
        }

    @classmethod
    def load(cls, path) -> "ResScenario":
        return cls.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))


def sample_res(network: Network, scenario: ResScenario, seed: int) -> Network:
    """Install a random PV distribution on a copy of ``network``.

    Units are drawn uniformly from ``unit_size_range`` (the last one clipped
    to the remaining capacity) and placed on uniformly chosen load points, or
    on buses chosen in proportion to their remaining potential. PV units at
    one bus are merged into a single generator. With ``power_factor < 1`` the
    plants absorb reactive power.
    """
    if scenario.load_scale != 1.0:
        network = network.replace(loads=tuple(
            Load(ld.id, ld.bus, ld.active_power * scenario.load_scale,
                 ld.reactive_power * scenario.load_scale, ld.kind)
            for ld in network.loads
        ))
    if scenario.total_capacity == 0:
        return network
    rng = np.random.default_rng(seed)
    lo, hi = scenario.unit_size_range
    remaining = scenario.total_capacity
    placed: dict[str, float] = {}

    if scenario.placement_rule == "uniform_over_load_points":
        buses = sorted(network.load_points)
        if not buses:
            raise ScenarioError(f"scenario {scenario.name}: network has no load points")
        while remaining > 1e-12:
            unit = min(rng.uniform(lo, hi), remaining)
            b = buses[int(rng.integers(len(buses)))]
            placed[b] = placed.get(b, 0.0) + unit
            remaining -= unit
    else:
        buses = sorted(scenario.potential)
        for b in buses:
            network.bus(b)  # KeyError for unknown buses
        room = np.array([float(scenario.potential[b]) for b in buses])
        if room.sum() < remaining - 1e-9:
            raise ScenarioError(
                f"scenario {scenario.name}: potential {room.sum():g} MW below capacity {remaining:g} MW"
            )
        while remaining > 1e-12:
            avail = room.sum()
            if avail <= 1e-12:
                break
            k = int(rng.choice(len(buses), p=room / avail))
            unit = min(rng.uniform(lo, hi), remaining, room[k])
            room[k] -= unit
            placed[buses[k]] = placed.get(buses[k], 0.0) + unit
            remaining -= unit

    q_ratio = -math.tan(math.acos(scenario.power_factor))
    gens = tuple(
        Load(f"PV_{scenario.name}_{b}", b, p, p * q_ratio, kind="pv") for b, p in sorted(placed.items())
    )
    return network.replace(generators=network.generators + gens)


# ---------------------------------------------------------------------------
# studies


@dataclass(frozen=True)
class SampleRecord:
    index: int
    sample_seed: int
    search_seed: int
    needed: bool  # sampled network violated a constraint before planning
    cost: CostTuple | None
    solution: tuple[str, ...]
    evaluations: int
    error: str | None = None
    wall_time: float = field(default=0.0, compare=False)

    @property
    def feasible(self) -> bool:
        return self.cost is not None and self.cost.level == 0

    def to_dict(self) -> dict:
        return {
            "index": self.index,
            "sample_seed": self.sample_seed,
            "search_seed": self.search_seed,
            "needed": self.needed,
            "level": None if self.cost is None else int(self.cost.level),
            "magnitude": None if self.cost is None else float(self.cost.magnitude),
            "solution": list(self.solution),
            "evaluations": self.evaluations,
            "feasible": self.feasible,
            "error": self.error,
        }


SUMMARY_FIELDS = ("study", "n", "feasibility_rate", "min", "q25", "median", "q75", "max", "mean", "need_rate")


def summarize(name: str, records: list[SampleRecord]) -> dict:
    n = len(records)
    costs = np.array([r.cost.magnitude for r in records if r.feasible], dtype=float)
    row = {"study": name, "n": n,
           "feasibility_rate": (len(costs) / n) if n else float("nan")}
    if len(costs):
        q = np.percentile(costs, [0, 25, 50, 75, 100])
        row.update(min=float(q[0]), q25=float(q[1]), median=float(q[2]), q75=float(q[3]),
                   max=float(q[4]), mean=float(costs.mean()))
    else:
        row.update({k: float("nan") for k in ("min", "q25", "median", "q75", "max", "mean")})
    row["need_rate"] = (sum(r.needed for r in records) / n) if n else float("nan")
    return row


@dataclass
class StudyResult:
    name: str
    records: list[SampleRecord]
    summary: dict = field(default_factory=dict)

    def __post_init__(self):
        self.records = sorted(self.records, key=lambda r: r.index)
        if not self.summary:
            self.summary = summarize(self.name, self.records)

    def records_json(self) -> str:
        return json.dumps({"study": self.name, "records": [r.to_dict() for r in self.records],
                           "summary": self.summary}, indent=2) + "\n"

    def timings(self) -> dict:
        return {str(r.index): r.wall_time for r in self.records}


def sample_seeds(master_seed: int, n: int) -> list[tuple[int, int]]:
    out = []
    for child in np.random.SeedSequence(master_seed).spawn(n):
        a, b = child.generate_state(2)
        out.append((int(a), int(b)))
    return out


def _run_sample(args) -> SampleRecord:
    index, seeds, base, scenario, rules, cases, search, algorithm = args
    sample_seed, search_seed = seeds
    t0 = time.perf_counter()
    try:
        net = sample_res(base, scenario, sample_seed)
        report = evaluate(net, cases)
        if extended_cost(report, 0.0).level == 0:
            return SampleRecord(index, sample_seed, search_seed, False, CostTuple(0, 0.0), (), 0,
                                wall_time=time.perf_counter() - t0)
        problem = PlanningProblem.from_network(net, cases, rules)
        if algorithm == "exhaustive":
            sol, cost = exhaustive_search(problem)
            evals = None
        else:
            res = run_search(problem, search.with_(rng_seed=search_seed))
            sol, cost, evals = res.solution, res.cost, res.trace.evaluations
        ordered = tuple(m for m in problem.catalog.ids if m in sol)
        n_evals = evals if evals is not None else 0
        return SampleRecord(index, sample_seed, search_seed, True, cost, ordered, n_evals,
                            wall_time=time.perf_counter() - t0)
    except Exception as exc:  # recorded per sample; never aborts the study
        return SampleRecord(index, sample_seed, search_seed, True, None, (), 0,
                            error=f"{type(exc).__name__}: {exc}", wall_time=time.perf_counter() - t0)


def run_study(
    base: Network,
    scenario: ResScenario,
    rules: PlanningRules,
    cases: list[LoadCase],
    search: SearchConfig,
    n_samples: int,
    master_seed: int,
    workers: int = 1,
    algorithm: str | None = None,
    name: str | None = None,
    order: list[int] | None = None,
) -> StudyResult:
    """Sample, plan and record ``n_samples`` independent scenario draws.

    ``algorithm="exhaustive"`` replaces the search by the exhaustive oracle.
    ``order`` only permutes execution; records come back sorted by index.
    """
    seeds = sample_seeds(master_seed, n_samples)
    idx = list(range(n_samples)) if order is None else [int(i) for i in order]
    if sorted(idx) != list(range(n_samples)):
        raise ValueError("order must be a permutation of the sample indices")
    jobs = [(i, seeds[i], base, scenario, rules, list(cases), search, algorithm) for i in idx]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            records = list(pool.map(_run_sample, jobs))
    else:
        records = [_run_sample(j) for j in jobs]
    return StudyResult(name or scenario.name, records)


def revalidate(result: StudyResult, base: Network, scenario: ResScenario, rules: PlanningRules,
               cases: list[LoadCase]) -> list[int]:
    """Indices of feasible records whose solution does not re-check to level 0."""
    bad = []
    for r in result.records:
        if not r.feasible:
            continue
        net = sample_res(base, scenario, r.sample_seed)
        if not r.solution:
            ok = extended_cost_level(net, cases) == 0
        else:
            problem = PlanningProblem.from_network(net, cases, rules)
            ok = problem.cost(frozenset(r.solution)).level == 0
        if not ok:
            bad.append(r.index)
    return bad


def extended_cost_level(net: Network, cases: list[LoadCase]) -> int:
    return extended_cost(evaluate(net, cases), 0.0).level


def aggregate(results: list[StudyResult]) -> list[dict]:
    """One summary row per study, ready for box-plot style comparison."""
    if not results:
        raise ValueError("aggregate needs at least one study result")
    return [dict(r.summary) for r in results]


def summary_csv(rows: list[dict]) -> str:
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=SUMMARY_FIELDS, lineterminator="\n")
    w.writeheader()
    for row in rows:
        w.writerow({k: row[k] for k in SUMMARY_FIELDS})
    return buf.getvalue()
