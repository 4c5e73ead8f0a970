"""Planning constraints and the lexicographic extended cost."""
from __future__ import annotations

from dataclasses import dataclass, field
from enum import IntEnum
from typing import NamedTuple

from .network import Network
from .powerflow import LoadCase, worst_case_results
from .topology import TopologyReport, analyze_topology


class Level(IntEnum):
    FEASIBLE = 0
    VOLTAGE = 1
    LINE_OVERLOAD = 2
    TRAFO_OVERLOAD = 3
    MESHED = 4
    UNSUPPLIED = 5


class CostTuple(NamedTuple):
    """(violated constraint level, magnitude); plain tuple ordering is lexicographic."""

    level: int
    magnitude: float

    @property
    def feasible(self) -> bool:
        return self.level == 0

    def to_dict(self) -> dict:
        return {"level": int(self.level), "magnitude": float(self.magnitude)}

    def __str__(self):
        return f"({self.level}, {self.magnitude:g})"


@dataclass(frozen=True)
class ConstraintReport:
    lp_us: int = 0
    lp_mf: int = 0
    tr_ol: float = 0.0
    ln_ol: float = 0.0
    lp_vv: int = 0
    # detail used by measure discovery; not part of the cost
    voltage_violations: frozenset[str] = field(default=frozenset(), compare=False)
    overloaded_lines: frozenset[str] = field(default=frozenset(), compare=False)
    overloaded_transformers: frozenset[str] = field(default=frozenset(), compare=False)
    unconverged_cases: tuple[str, ...] = field(default=(), compare=False)
    topology: TopologyReport | None = field(default=None, compare=False, repr=False)

    def to_dict(self) -> dict:
        return {
            "lp_us": self.lp_us,
            "lp_mf": self.lp_mf,
            "tr_ol": self.tr_ol,
            "ln_ol": self.ln_ol,
            "lp_vv": self.lp_vv,
            "voltage_violations": sorted(self.voltage_violations),
            "overloaded_lines": sorted(self.overloaded_lines),
            "overloaded_transformers": sorted(self.overloaded_transformers),
            "unconverged_cases": list(self.unconverged_cases),
        }


def evaluate(network: Network, cases: list[LoadCase], check: bool = True) -> ConstraintReport:
    """Evaluate all constraints over all load cases.

    Topology is checked first; load flows only run when every load point is
    supplied and no feeder is meshed. Voltage violations count a load point
    once per case, overloads are summed over cases. A non-converged case adds
    the total line length of the network to ``ln_ol``.
    """
    topo = analyze_topology(network, check=check)
    lp_us = topo.unsupplied_load_point_count
    lp_mf = topo.meshed_load_point_count
    if lp_mf == 0 and not topo.is_radial:
        # a mesh through station or junction buses only; still must not pass
        lp_mf = 1
    if lp_us or lp_mf:
        return ConstraintReport(lp_us=lp_us, lp_mf=lp_mf, topology=topo)

    tr_ol = 0.0
    ln_ol = 0.0
    lp_vv = 0
    vv: set[str] = set()
    ol_lines: set[str] = set()
    ol_trafos: set[str] = set()
    unconverged = []
    total_length = sum(ln.length for ln in network.lines)
    line_max = {ln.id: (ln.max_loading, ln.length) for ln in network.lines}
    trafo_max = {tr.id: tr.max_loading for tr in network.transformers}
    load_points = network.load_points

    for case, res in zip(cases, worst_case_results(network, cases, topo)):
        if not res.converged:
            unconverged.append(case.name)
            ln_ol += total_length
            continue
        for tid, loading in res.transformer_loading.items():
            excess = loading - trafo_max[tid]
            if excess > 0:
                tr_ol += excess
                ol_trafos.add(tid)
        for lid, loading in res.line_loading.items():
            limit, length = line_max[lid]
            if loading > limit:
                ln_ol += length
                ol_lines.add(lid)
        for b in load_points:
            vm = res.bus_voltage[b]
            if vm < case.v_min or vm > case.v_max:
                lp_vv += 1
                vv.add(b)

    return ConstraintReport(
        lp_us=0,
        lp_mf=0,
        tr_ol=tr_ol,
        ln_ol=ln_ol,
        lp_vv=lp_vv,
        voltage_violations=frozenset(vv),
        overloaded_lines=frozenset(ol_lines),
        overloaded_transformers=frozenset(ol_trafos),
        unconverged_cases=tuple(unconverged),
        topology=topo,
    )


def extended_cost(report: ConstraintReport, solution_cost: float) -> CostTuple:
    if report.lp_us > 0:
        return CostTuple(5, float(report.lp_us))
    if report.lp_mf > 0:
        return CostTuple(4, float(report.lp_mf))
    if report.tr_ol > 0:
        return CostTuple(3, float(report.tr_ol))
    if report.ln_ol > 0:
        return CostTuple(2, float(report.ln_ol))
    if report.lp_vv > 0:
        return CostTuple(1, float(report.lp_vv))
    return CostTuple(0, float(solution_cost))


def compare(a: CostTuple, b: CostTuple) -> int:
    """-1, 0 or 1 as ``a`` is lexicographically less than, equal to or greater than ``b``."""
    ka = (a[0], a[1])
    kb = (b[0], b[1])
    return int(ka > kb) - int(ka < kb)
