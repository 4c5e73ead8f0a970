"""Backward/forward sweep load flow for radial networks.

Everything is solved in per-unit on a 1 MVA base with each bus' nominal
voltage as voltage base. Loads and generators are constant-PQ; generation
enters as negative load. A transformer is an ideal ratio on its HV side in
series with its short-circuit impedance on the LV side; each tap step moves
the ratio by ``tap_step`` percent (raising the tap raises the LV voltage).
"""
from __future__ import annotations

import json
import math
from collections import defaultdict, deque
from dataclasses import dataclass, field
from pathlib import Path

from .network import Network
from .topology import TopologyReport, analyze_topology, conducting_lines

S_BASE = 1.0  # MVA
TOLERANCE = 1e-8
MAX_ITERATIONS = 100


class PowerFlowError(RuntimeError):
    pass


@dataclass(frozen=True)
class LoadCase:
    name: str
    load_scale: float = 1.0
    generation_scale: float = 1.0
    v_min: float = 0.9
    v_max: float = 1.1

    def __post_init__(self):
        if self.load_scale < 0 or self.generation_scale < 0:
            raise ValueError(f"load case {self.name}: scale factors must be non-negative")
        if not 0 <= self.v_min < self.v_max:
            raise ValueError(f"load case {self.name}: need 0 <= v_min < v_max")

    def to_dict(self) -> dict:
        return {"name": self.name, "load_scale": self.load_scale, "generation_scale": self.generation_scale,
                "v_min": self.v_min, "v_max": self.v_max}


def load_cases(path) -> list[LoadCase]:
    """Read a JSON list of load cases (or ``{"cases": [...]}``)."""
    data = json.loads(Path(path).read_text(encoding="utf-8"))
    if isinstance(data, dict):
        data = data.get("cases")
    if not isinstance(data, list) or not data:
        raise ValueError(f"{path}: expected a non-empty list of load cases")
    try:
        return [LoadCase(**d) for d in data]
    except TypeError as exc:
        raise ValueError(f"{path}: {exc}") from None


@dataclass
class PowerFlowResult:
    bus_voltage: dict[str, float]
    line_loading: dict[str, float]
    transformer_loading: dict[str, float]
    converged: bool
    iterations: int
    case: str = ""
    bus_voltage_complex: dict[str, complex] = field(default_factory=dict, repr=False)

    def to_dict(self) -> dict:
        return {
            "case": self.case,
            "converged": self.converged,
            "iterations": self.iterations,
            "bus_voltage": self.bus_voltage,
            "line_loading": self.line_loading,
            "transformer_loading": self.transformer_loading,
        }


def transformer_impedance(tr) -> complex:
    """Series impedance in system per-unit, referred to the LV side."""
    z = tr.short_circuit_voltage / 100.0
    r = tr.short_circuit_losses / 100.0
    x = math.sqrt(max(z * z - r * r, 0.0))
    return complex(r, x) * (S_BASE / tr.rated_power)


def tap_ratio(tr) -> float:
    return 1.0 + tr.tap_position * tr.tap_step / 100.0


@dataclass
class _Branch:
    child: str
    parent: str
    ratio: float  # V_child = ratio * V_parent - z * I_child
    z: complex
    lines: list = field(default_factory=list)  # (line id, z_i, max_current kA, v_base kV)
    trafo: object = None
    parent_is_hv: bool = True


def _build_tree(network: Network, topo: TopologyReport):
    """Return (order, branch_of_child) for the supplied tree rooted at the source."""
    groups: dict[tuple[str, str], list] = defaultdict(list)
    for ln in conducting_lines(network):
        if ln.from_bus not in topo.supplied_bus_ids:
            continue
        lt = network.line_type(ln.std_type)
        vb = network.bus(ln.from_bus).nominal_voltage
        z = complex(lt.r_per_km, lt.x_per_km) * ln.length * S_BASE / (vb * vb)
        key = (ln.from_bus, ln.to_bus) if ln.from_bus < ln.to_bus else (ln.to_bus, ln.from_bus)
        groups[key].append((ln.id, z, lt.max_current, vb))

    adj: dict[str, list] = defaultdict(list)
    for (a, b), members in groups.items():
        adj[a].append((b, "line", members))
        adj[b].append((a, "line", members))
    for tr in network.transformers:
        if tr.in_service and tr.hv_bus in topo.supplied_bus_ids:
            adj[tr.hv_bus].append((tr.lv_bus, "trafo", tr))
            adj[tr.lv_bus].append((tr.hv_bus, "trafo", tr))

    src = network.source.bus
    order = [src]
    branch: dict[str, _Branch] = {}
    visited = {src}
    queue = deque([src])
    while queue:
        p = queue.popleft()
        for c, kind, payload in adj[p]:
            if c in visited:
                continue
            visited.add(c)
            if kind == "line":
                zs = [m[1] for m in payload]
                if any(z == 0 for z in zs):
                    zeq = 0j
                else:
                    zeq = 1.0 / sum(1.0 / z for z in zs)
                branch[c] = _Branch(c, p, 1.0, zeq, lines=payload)
            else:
                tr = payload
                n = tap_ratio(tr)
                zt = transformer_impedance(tr)
                if p == tr.hv_bus:
                    branch[c] = _Branch(c, p, n, zt, trafo=tr, parent_is_hv=True)
                else:
                    branch[c] = _Branch(c, p, 1.0 / n, zt / (n * n), trafo=tr, parent_is_hv=False)
            order.append(c)
            queue.append(c)
    return order, branch


def run_load_flow(
    network: Network,
    case: LoadCase,
    topology: TopologyReport | None = None,
    tolerance: float = TOLERANCE,
    max_iterations: int = MAX_ITERATIONS,
) -> PowerFlowResult:
    """Solve one load case on a radial network.

    Raises :class:`PowerFlowError` if the supplied part of the network is not
    radial or a load point is unsupplied. Non-convergence is reported through
    ``converged=False``, not raised.
    """
    topo = topology if topology is not None else analyze_topology(network)
    if not topo.is_radial:
        raise PowerFlowError(f"case {case.name}: network is not radial")
    if topo.unsupplied_load_points:
        raise PowerFlowError(
            f"case {case.name}: unsupplied load points {sorted(topo.unsupplied_load_points)}"
        )

    order, branch = _build_tree(network, topo)
    supplied = topo.supplied_bus_ids

    s_inj: dict[str, complex] = defaultdict(complex)  # consumption, MVA in pu
    for ld in network.loads:
        s_inj[ld.bus] += complex(ld.active_power, ld.reactive_power) * case.load_scale / S_BASE
    for g in network.generators:
        if g.bus in supplied:
            s_inj[g.bus] -= complex(g.active_power, g.reactive_power) * case.generation_scale / S_BASE

    src = network.source.bus
    v = {src: complex(network.source.vm_pu, 0.0)}
    for c in order[1:]:
        br = branch[c]
        v[c] = br.ratio * v[br.parent]

    current: dict[str, complex] = {}
    converged = False
    it = 0
    rev = order[::-1]
    while it < max_iterations:
        it += 1
        # backward sweep: branch currents referred to the child side
        acc: dict[str, complex] = defaultdict(complex)
        for c in rev:
            s = s_inj.get(c)
            i_c = acc[c] + ((s / v[c]).conjugate() if s else 0j)
            if c == src:
                break
            current[c] = i_c
            br = branch[c]
            acc[br.parent] += br.ratio * i_c
        # forward sweep
        dv = 0.0
        ok = True
        for c in order[1:]:
            br = branch[c]
            new = br.ratio * v[br.parent] - br.z * current[c]
            d = abs(new - v[c])
            if d > dv:
                dv = d
            v[c] = new
            if not abs(new) > 1e-6 or not math.isfinite(d):
                ok = False
                break
        if not ok:
            break
        if dv < tolerance:
            converged = True
            break

    line_loading = {ln.id: 0.0 for ln in network.lines}
    trafo_loading = {tr.id: 0.0 for tr in network.transformers}
    for c in order[1:]:
        br = branch[c]
        i_c = current.get(c, 0j)
        if br.trafo is not None:
            tr = br.trafo
            if br.parent_is_hv:
                s_hv = v[br.parent] * (br.ratio * i_c).conjugate()
            else:
                s_hv = v[c] * i_c.conjugate()
            trafo_loading[tr.id] = abs(s_hv) * S_BASE / tr.rated_power * 100.0
            continue
        zs = [m[1] for m in br.lines]
        nzero = sum(1 for z in zs if z == 0)
        for lid, z, imax, vb in br.lines:
            if nzero:
                share = (1.0 / nzero) if z == 0 else 0.0
                i_line = abs(i_c) * share
            else:
                i_line = abs(i_c * br.z / z)
            i_ka = i_line * S_BASE / (math.sqrt(3) * vb)
            line_loading[lid] = i_ka / imax * 100.0

    vm = {b: abs(v[b]) for b in order}
    return PowerFlowResult(
        bus_voltage=vm,
        line_loading=line_loading,
        transformer_loading=trafo_loading,
        converged=converged,
        iterations=it,
        case=case.name,
        bus_voltage_complex=dict(v),
    )


def worst_case_results(
    network: Network, cases: list[LoadCase], topology: TopologyReport | None = None
) -> list[PowerFlowResult]:
    """One result per load case, in input order."""
    if not cases:
        return []
    topo = topology if topology is not None else analyze_topology(network)
    out = []
    for case in cases:
        try:
            out.append(run_load_flow(network, case, topo))
        except PowerFlowError as exc:
            raise PowerFlowError(f"[{case.name}] {exc}") from exc
    return out
