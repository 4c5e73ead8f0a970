"""Planning measures: catalog, dependencies, application and discovery.

A solution is a ``frozenset`` of measure ids. Measures are applied to a copy
of the base network; the base value is never modified, and the result does
not depend on the order in which measures are listed.
"""
from __future__ import annotations

import dataclasses
import json
import math
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Iterable

import networkx as nx

from .constraints import ConstraintReport
from .network import Bus, Line, Network, Transformer
from .topology import TopologyReport, analyze_topology, feeder_of, path_to_source, station_buses

Solution = frozenset

KINDS = (
    "replace_line",
    "open_switch",
    "parallel_line",
    "new_cabinet_parallel_line",
    "new_substation_split",
    "replace_transformer",
    "change_tap",
    "new_line_trail",
)


class MeasureError(ValueError):
    pass


class MeasureConflictError(MeasureError):
    """Two measures in one solution modify the same property differently."""


class GeometryError(MeasureError):
    """A discovery rule needs bus positions the network does not have."""


@dataclass(frozen=True)
class Measure:
    id: str
    kind: str
    targets: tuple[str, ...]
    cost: float
    params: dict = field(default_factory=dict, compare=False, hash=False)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise MeasureError(f"measure {self.id}: unknown kind {self.kind!r}")
        if not self.cost >= 0:
            raise MeasureError(f"measure {self.id}: cost must be non-negative")

    def to_dict(self) -> dict:
        return {"id": self.id, "kind": self.kind, "targets": list(self.targets),
                "cost": self.cost, "params": self.params}


@dataclass(frozen=True)
class MeasureCatalog:
    measures: tuple[Measure, ...] = ()
    excludes: frozenset[frozenset[str]] = frozenset()
    requires: dict[str, frozenset[str]] = field(default_factory=dict, compare=False, hash=False)
    at_least_one: tuple[frozenset[str], ...] = ()

    def __post_init__(self):
        by_id = {}
        for m in self.measures:
            if m.id in by_id:
                raise MeasureError(f"duplicate measure id {m.id}")
            by_id[m.id] = m
        partners: dict[str, set[str]] = {m: set() for m in by_id}
        for pair in self.excludes:
            if len(pair) != 2:
                raise MeasureError(f"excludes entry {sorted(pair)} is not a pair of distinct ids")
            a, b = sorted(pair)
            partners.setdefault(a, set()).add(b)
            partners.setdefault(b, set()).add(a)
        object.__setattr__(self, "_by_id", by_id)
        object.__setattr__(self, "_partners", {k: frozenset(v) for k, v in partners.items()})

    def __getitem__(self, measure_id: str) -> Measure:
        return self._by_id[measure_id]

    def __contains__(self, measure_id) -> bool:
        return measure_id in self._by_id

    def __len__(self) -> int:
        return len(self.measures)

    @property
    def ids(self) -> list[str]:
        return [m.id for m in self.measures]

    def excluded_with(self, measure_id: str) -> frozenset[str]:
        return self._partners.get(measure_id, frozenset())

    def problems(self) -> list[str]:
        """Referential problems; an empty list means the catalog is consistent."""
        out = []
        for pair in self.excludes:
            for m in pair:
                if m not in self:
                    out.append(f"excludes references unknown measure {m}")
        for m, req in self.requires.items():
            if m not in self:
                out.append(f"requires key {m} is not in the catalog")
            for r in req:
                if r not in self:
                    out.append(f"{m} requires unknown measure {r}")
                if r == m:
                    out.append(f"{m} requires itself")
        for group in self.at_least_one:
            if not group:
                out.append("empty at_least_one group")
            for m in group:
                if m not in self:
                    out.append(f"at_least_one references unknown measure {m}")
        return out

    def to_dict(self) -> dict:
        return {
            "measures": [m.to_dict() for m in self.measures],
            "excludes": sorted(sorted(p) for p in self.excludes),
            "requires": {k: sorted(v) for k, v in sorted(self.requires.items())},
            "at_least_one": [sorted(g) for g in self.at_least_one],
        }

    @classmethod
    def from_dict(cls, data: dict) -> "MeasureCatalog":
        measures = tuple(
            Measure(m["id"], m["kind"], tuple(m["targets"]), float(m["cost"]), dict(m.get("params", {})))
            for m in data.get("measures", [])
        )
        return cls(
            measures=measures,
            excludes=frozenset(frozenset(p) for p in data.get("excludes", [])),
            requires={k: frozenset(v) for k, v in data.get("requires", {}).items()},
            at_least_one=tuple(frozenset(g) for g in data.get("at_least_one", [])),
        )


def _check_members(solution: Iterable[str], catalog: MeasureCatalog) -> None:
    for m in solution:
        if m not in catalog:
            raise MeasureError(f"unknown measure {m!r}")


def solution_cost(solution: Iterable[str], catalog: MeasureCatalog) -> float:
    solution = list(solution)
    _check_members(solution, catalog)
    return math.fsum(catalog[m].cost for m in solution)


def satisfies_dependencies(solution: frozenset[str], catalog: MeasureCatalog) -> bool:
    for m in solution:
        if catalog.excluded_with(m) & solution:
            return False
        req = catalog.requires.get(m)
        if req and not req <= solution:
            return False
    for group in catalog.at_least_one:
        if group.isdisjoint(solution):
            return False
    return True


# ---------------------------------------------------------------------------
# application


def apply(network: Network, solution: Iterable[str], catalog: MeasureCatalog) -> Network:
    """Return ``network`` with every measure of ``solution`` applied."""
    ids = sorted(set(solution))
    if not ids:
        return network
    _check_members(ids, catalog)

    updates: dict[tuple[str, str], dict[str, Any]] = {}
    owner: dict[tuple[str, str, str], tuple[str, Any]] = {}
    new_lines: list[Line] = []
    new_trafos: list[Transformer] = []

    def set_attr(cls: str, elem: str, attr: str, value, mid: str):
        key = (cls, elem, attr)
        prev = owner.get(key)
        if prev is not None and prev[1] != value:
            raise MeasureConflictError(
                f"measures {prev[0]} and {mid} both set {cls} {elem}.{attr}"
            )
        owner[key] = (mid, value)
        updates.setdefault((cls, elem), {})[attr] = value

    for mid in ids:
        m = catalog[mid]
        p = m.params
        if m.kind == "replace_line":
            set_attr("line", m.targets[0], "std_type", p["std_type"], mid)
        elif m.kind == "open_switch":
            set_attr("switch", m.targets[0], "closed", False, mid)
        elif m.kind in ("parallel_line", "new_cabinet_parallel_line"):
            base = network.line(m.targets[0])
            new_lines.append(dataclasses.replace(
                base, id=p["new_line_id"], std_type=p["std_type"], in_service=True,
            ))
            if m.kind == "new_cabinet_parallel_line":
                set_attr("bus", p["cabinet_bus"], "is_switching_cabinet", True, mid)
        elif m.kind == "new_substation_split":
            template = network.transformer(p["template_transformer"])
            new_trafos.append(dataclasses.replace(
                template, id=p["new_transformer_id"], lv_bus=m.targets[0], in_service=True,
            ))
            set_attr("line", p["boundary_line"], "in_service", False, mid)
        elif m.kind == "replace_transformer":
            for attr in ("rated_power", "short_circuit_voltage", "short_circuit_losses"):
                set_attr("trafo", m.targets[0], attr, p[attr], mid)
        elif m.kind == "change_tap":
            set_attr("trafo", m.targets[0], "tap_position", p["tap_position"], mid)
        elif m.kind == "new_line_trail":
            new_lines.append(Line(
                p["new_line_id"], m.targets[0], m.targets[1], p["length"], p["std_type"],
            ))

    def patched(elements, cls):
        out = []
        for e in elements:
            u = updates.get((cls, e.id))
            out.append(dataclasses.replace(e, **u) if u else e)
        return tuple(out)

    existing = {ln.id for ln in network.lines}
    for ln in new_lines:
        if ln.id in existing:
            raise MeasureConflictError(f"line id {ln.id} added twice")
        existing.add(ln.id)
    return network.replace(
        buses=patched(network.buses, "bus"),
        lines=patched(network.lines, "line") + tuple(new_lines),
        switches=patched(network.switches, "switch"),
        transformers=patched(network.transformers, "trafo") + tuple(new_trafos),
    )


def reconfiguration_base(network: Network, catalog: MeasureCatalog) -> Network:
    """Close every switch that the catalog can open.

    With switching measures the search starts from the all-closed network and
    the sectioning points become part of the solution.
    """
    switchable = {m.targets[0] for m in catalog.measures if m.kind == "open_switch"}
    if not switchable:
        return network
    return network.replace(switches=tuple(
        dataclasses.replace(sw, closed=True) if sw.id in switchable and not sw.closed else sw
        for sw in network.switches
    ))


# ---------------------------------------------------------------------------
# discovery rules


@dataclass(frozen=True)
class TransformerType:
    name: str
    rated_power: float
    short_circuit_voltage: float
    short_circuit_losses: float
    cost: float


@dataclass(frozen=True)
class LineTrail:
    from_bus: str
    to_bus: str
    std_type: str | None = None


@dataclass(frozen=True)
class PlanningRules:
    enable: frozenset[str] = frozenset({"replace_line"})
    replace_scope: str = "violated_paths"  # or "all"
    customer_access_min_length_m: float = 50.0
    substation_min_distance_m: float = 50.0
    line_costs: dict = field(default_factory=dict, hash=False)  # std_type -> cost per km
    open_switch_cost: float = 0.0
    cabinet_cost: float = 0.0
    substation_cost: float = 0.0
    mv_connection_cost_per_km: float = 0.0
    trail_factor: float = 1.5
    tap_range: tuple[int, int] | None = None
    tap_change_cost: float = 0.0
    parallel_requires_max_diameter: bool = True
    transformer_types: tuple[TransformerType, ...] = ()
    line_trails: tuple[LineTrail, ...] = ()
    decommission_lines: tuple[str, ...] = ()

    def __post_init__(self):
        unknown = set(self.enable) - set(KINDS)
        if unknown:
            raise MeasureError(f"unknown measure kind(s) {sorted(unknown)}")
        if self.replace_scope not in ("violated_paths", "all"):
            raise MeasureError(f"replace_scope must be 'violated_paths' or 'all'")

    @classmethod
    def from_dict(cls, data: dict) -> "PlanningRules":
        names = {f.name for f in dataclasses.fields(cls)}
        unknown = sorted(set(data) - names)
        if unknown:
            raise MeasureError(f"planning rules: unknown key {unknown[0]!r}")
        kw = dict(data)
        if "enable" in kw:
            en = kw["enable"]
            kw["enable"] = frozenset(k for k, v in en.items() if v) if isinstance(en, dict) else frozenset(en)
        if kw.get("tap_range") is not None:
            kw["tap_range"] = tuple(kw["tap_range"])
        kw["transformer_types"] = tuple(TransformerType(**t) for t in kw.get("transformer_types", ()))
        kw["line_trails"] = tuple(LineTrail(**t) for t in kw.get("line_trails", ()))
        kw["decommission_lines"] = tuple(str(x) for x in kw.get("decommission_lines", ()))
        return cls(**kw)

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d["enable"] = {k: (k in self.enable) for k in KINDS}
        d["tap_range"] = list(self.tap_range) if self.tap_range is not None else None
        return d

    @classmethod
    def load(cls, path: str | Path) -> "PlanningRules":
        return cls.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))


def _slug(text: str) -> str:
    return re.sub(r"[^0-9A-Za-z]+", "_", text).strip("_")


def _distance_m(a: Bus, b: Bus) -> float:
    return math.dist(a.position, b.position)


def _line_cost(network: Network, rules: PlanningRules, std_type: str, length: float) -> float:
    per_km = rules.line_costs.get(std_type, network.line_type(std_type).cost_per_km)
    return per_km * length


def _closed_graph(network: Network, extra_edges=()) -> nx.Graph:
    """Bus graph with every in-service branch, ignoring switch states.

    ``extra_edges`` are bus pairs of candidate new lines.
    """
    g = nx.Graph()
    g.add_nodes_from(b.id for b in network.buses)
    for ln in network.lines:
        if ln.in_service:
            if g.has_edge(ln.from_bus, ln.to_bus):
                g[ln.from_bus][ln.to_bus]["lines"].append(ln.id)
            else:
                g.add_edge(ln.from_bus, ln.to_bus, lines=[ln.id])
    for tr in network.transformers:
        if tr.in_service and not g.has_edge(tr.hv_bus, tr.lv_bus):
            g.add_edge(tr.hv_bus, tr.lv_bus, lines=[])
    for a, b in extra_edges:
        if g.has_edge(a, b):
            g[a][b]["lines"].append(None)
        else:
            g.add_edge(a, b, lines=[None])
    return g


def stub_lines(network: Network, extra_edges=()) -> set[str]:
    """Lines whose opening always disconnects something (bridges of the all-closed graph).

    Candidate trails passed as ``extra_edges`` can turn a spur into a loop.
    """
    g = _closed_graph(network, extra_edges)
    out = set()
    for a, b in nx.bridges(g):
        lines = g[a][b]["lines"]
        if len(lines) == 1 and lines[0] is not None:
            out.add(lines[0])
    return out


def _loop_mates(network: Network) -> dict[str, set[str]]:
    """Map each line to the lines sharing a 2-edge-connected block with it."""
    g = _closed_graph(network)
    h = g.copy()
    h.remove_edges_from(list(nx.bridges(g)))
    mates: dict[str, set[str]] = {}
    for comp in nx.connected_components(h):
        lines = set()
        for a, b, d in h.subgraph(comp).edges(data=True):
            lines.update(d["lines"])
        for lid in lines:
            mates[lid] = lines
    return mates


def _violated_feeder_lines(network: Network, report: ConstraintReport, topo: TopologyReport):
    """Lines (incl. root lines) of feeders with a violated load point or overloaded line."""
    hot_buses = set(report.voltage_violations)
    for lid in report.overloaded_lines:
        ln = network.line(lid)
        hot_buses.update((ln.from_bus, ln.to_bus))
    buses = set()
    for b in hot_buses:
        f = feeder_of(topo, b)
        if f is not None:
            buses |= f.buses
    return [ln for ln in network.lines if ln.in_service and (ln.from_bus in buses or ln.to_bus in buses)]


def discover_measures(network: Network, report: ConstraintReport, rules: PlanningRules) -> MeasureCatalog:
    """Generate the candidate measure catalog for a violated network.

    ``network`` is the network as operated and ``report`` its constraint
    evaluation. The result is deterministic for identical inputs.
    """
    topo = report.topology if report.topology is not None else analyze_topology(network)
    stations = station_buses(network)
    measures: list[Measure] = []
    excludes: set[frozenset[str]] = set()
    requires: dict[str, frozenset[str]] = {}
    at_least_one: list[frozenset[str]] = []
    en = rules.enable
    types_by_rank = sorted(network.line_types, key=lambda t: t.diameter_rank)
    max_type = types_by_rank[-1] if types_by_rank else None

    for rule in ("new_substation_split", "new_line_trail"):
        if rule in en and (rule != "new_line_trail" or rules.line_trails):
            needed = network.buses if rule == "new_substation_split" else [
                network.bus(b) for t in rules.line_trails for b in (t.from_bus, t.to_bus)
            ]
            if any(b.position is None for b in needed):
                raise GeometryError(f"rule {rule} requires bus positions")

    # (a) line replacement
    replace_ids: dict[str, dict[str, str]] = {}  # line -> std_type -> measure id

    def add_replacements(ln: Line, allow_same: bool):
        if ln.id in replace_ids:
            return
        cur = network.line_type(ln.std_type)
        options = [t for t in types_by_rank
                   if t.diameter_rank > cur.diameter_rank or (allow_same and t.name == cur.name)]
        if not options:
            return
        ids = {}
        for t in options:
            mid = f"REPLACE_LINE_{ln.id}" if len(options) == 1 else f"REPLACE_LINE_{ln.id}_{_slug(t.name)}"
            measures.append(Measure(mid, "replace_line", (ln.id,),
                                    _line_cost(network, rules, t.name, ln.length), {"std_type": t.name}))
            ids[t.name] = mid
        for a in ids.values():
            for b in ids.values():
                if a < b:
                    excludes.add(frozenset((a, b)))
        replace_ids[ln.id] = ids

    decommission = set(rules.decommission_lines)
    min_access_km = rules.customer_access_min_length_m / 1000.0

    def admissible(ln: Line) -> bool:
        return ln.in_service and not (ln.is_customer_access and ln.length <= min_access_km)

    if "replace_line" in en:
        if rules.replace_scope == "all":
            candidates = {ln.id for ln in network.lines}
        else:
            candidates = set(report.overloaded_lines)
            for b in sorted(report.voltage_violations):
                candidates.update(path_to_source(network, b, topo))
            if "open_switch" in en:
                mates = _loop_mates(network)
                for lid in list(candidates):
                    candidates |= mates.get(lid, set())
        for ln in network.lines:
            if ln.id in candidates and ln.id not in decommission and admissible(ln):
                add_replacements(ln, allow_same=False)
    for ln in network.lines:
        if ln.id in decommission:
            add_replacements(ln, allow_same=True)

    # (b) switching
    switch_ids_by_line: dict[str, list[str]] = {}
    if "open_switch" in en:
        trail_edges = [(t.from_bus, t.to_bus) for t in rules.line_trails] if "new_line_trail" in en else []
        stubs = stub_lines(network, trail_edges)
        for sw in network.switches:
            ln = network.line(sw.line_id)
            if ln.id in stubs or not ln.in_service:
                continue
            mid = f"OPEN_SWITCH_{sw.id}"
            measures.append(Measure(mid, "open_switch", (sw.id,), rules.open_switch_cost))
            switch_ids_by_line.setdefault(ln.id, []).append(mid)
        for group in switch_ids_by_line.values():
            for a in group:
                for b in group:
                    if a < b:
                        excludes.add(frozenset((a, b)))

    # (c), (d) parallel lines
    hot_lines = [ln for ln in _violated_feeder_lines(network, report, topo) if admissible(ln)]
    cabinet_like = {b.id for b in network.buses if b.is_switching_cabinet} | stations

    def parallel_requirement(ln: Line) -> frozenset[str]:
        if not rules.parallel_requires_max_diameter or max_type is None or ln.std_type == max_type.name:
            return frozenset()
        add_replacements(ln, allow_same=False)
        return frozenset({replace_ids[ln.id][max_type.name]})

    if "parallel_line" in en and max_type is not None:
        for ln in hot_lines:
            if ln.from_bus in cabinet_like and ln.to_bus in cabinet_like:
                mid = f"PARALLEL_LINE_{ln.id}"
                measures.append(Measure(mid, "parallel_line", (ln.id,),
                                        _line_cost(network, rules, max_type.name, ln.length),
                                        {"std_type": max_type.name, "new_line_id": f"{ln.id}_par"}))
                req = parallel_requirement(ln)
                if req:
                    requires[mid] = req
    if "new_cabinet_parallel_line" in en and max_type is not None:
        by_bus: dict[str, list[str]] = {}
        for ln in hot_lines:
            ends = [ln.from_bus in cabinet_like, ln.to_bus in cabinet_like]
            if sum(ends) != 1:
                continue
            new_cab = ln.to_bus if ends[0] else ln.from_bus
            mid = f"NEW_CABINET_PARALLEL_LINE_{ln.id}"
            cost = _line_cost(network, rules, max_type.name, ln.length) + rules.cabinet_cost
            measures.append(Measure(mid, "new_cabinet_parallel_line", (ln.id,), cost,
                                    {"std_type": max_type.name, "new_line_id": f"{ln.id}_par",
                                     "cabinet_bus": new_cab}))
            by_bus.setdefault(new_cab, []).append(mid)
            req = parallel_requirement(ln)
            if req:
                requires[mid] = req
        for group in by_bus.values():
            for a in group:
                for b in group:
                    if a < b:
                        excludes.add(frozenset((a, b)))

    # (e) network split with a new substation
    if "new_substation_split" in en:
        hot_buses = {b for ln in hot_lines for b in (ln.from_bus, ln.to_bus)}
        for bus in network.buses:
            if not bus.is_switching_cabinet or bus.id in stations or bus.id not in hot_buses:
                continue
            split = _split_parameters(network, topo, bus.id, stations)
            if split is None:
                continue
            station, template, boundary = split
            dist = _distance_m(network.bus(station), bus)
            if dist <= rules.substation_min_distance_m:
                continue
            cost = rules.substation_cost + rules.mv_connection_cost_per_km * dist / 1000.0 * rules.trail_factor
            measures.append(Measure(
                f"NEW_SUBSTATION_{bus.id}", "new_substation_split", (bus.id,), cost,
                {"template_transformer": template, "new_transformer_id": f"T_{bus.id}",
                 "boundary_line": boundary},
            ))

    # (f) transformer replacement, (g) tap changes
    for tr in network.transformers:
        if not tr.in_service:
            continue
        if "replace_transformer" in en:
            ids = []
            for tt in sorted(rules.transformer_types, key=lambda t: (t.rated_power, t.name)):
                if tt.rated_power > tr.rated_power:
                    mid = f"REPLACE_TRANSFORMER_{tr.id}_{_slug(tt.name)}"
                    measures.append(Measure(mid, "replace_transformer", (tr.id,), tt.cost, {
                        "type": tt.name, "rated_power": tt.rated_power,
                        "short_circuit_voltage": tt.short_circuit_voltage,
                        "short_circuit_losses": tt.short_circuit_losses,
                    }))
                    ids.append(mid)
            excludes.update(frozenset((a, b)) for a in ids for b in ids if a < b)
        if "change_tap" in en:
            lo, hi = tr.tap_range
            if rules.tap_range is not None:
                lo, hi = max(lo, rules.tap_range[0]), min(hi, rules.tap_range[1])
            ids = []
            for pos in range(lo, hi + 1):
                if pos == tr.tap_position:
                    continue
                mid = f"CHANGE_TAP_{tr.id}_{pos}"
                measures.append(Measure(mid, "change_tap", (tr.id,), rules.tap_change_cost,
                                        {"tap_position": pos}))
                ids.append(mid)
            excludes.update(frozenset((a, b)) for a in ids for b in ids if a < b)

    # (h) new line trails
    if "new_line_trail" in en:
        for trail in rules.line_trails:
            a, b = network.bus(trail.from_bus), network.bus(trail.to_bus)
            std = trail.std_type or (max_type.name if max_type else None)
            if std is None:
                raise MeasureError("new_line_trail needs a line type")
            length = _distance_m(a, b) / 1000.0 * rules.trail_factor
            mid = f"NEW_TRAIL_{a.id}_{b.id}"
            measures.append(Measure(mid, "new_line_trail", (a.id, b.id),
                                    _line_cost(network, rules, std, length),
                                    {"new_line_id": f"trail_{a.id}_{b.id}", "length": length,
                                     "std_type": std}))

    # decommissioned lines must be renewed or taken out by opening one of their switches
    for lid in rules.decommission_lines:
        group = set(replace_ids.get(lid, {}).values()) | set(switch_ids_by_line.get(lid, []))
        if not group:
            raise MeasureError(f"decommissioned line {lid} has neither renewal nor switching measures")
        at_least_one.append(frozenset(group))

    return MeasureCatalog(tuple(measures), frozenset(excludes), requires, tuple(at_least_one))


def _split_parameters(network: Network, topo: TopologyReport, cabinet: str, stations):
    """(station, template transformer, boundary line) for splitting at ``cabinet``.

    Buses on the path between the cabinet and its station go to whichever
    substation is nearer along the path; the line where the assignment flips
    is taken out of service.
    """
    f = feeder_of(topo, cabinet)
    if f is None or f.meshed:
        return None
    path = path_to_source(network, cabinet, topo)
    if not path:
        return None
    # walk from the cabinet towards the station accumulating distance
    buses = [cabinet]
    for lid in path:
        ln = network.line(lid)
        buses.append(ln.to_bus if ln.from_bus == buses[-1] else ln.from_bus)
    station = buses[-1]
    template = next((tr.id for tr in network.transformers if tr.in_service and tr.lv_bus == station), None)
    if template is None:
        return None
    lengths = [network.line(lid).length for lid in path]
    total = sum(lengths)
    walked = 0.0
    boundary = path[-1]
    for lid, length in zip(path, lengths):
        # the far end of this line is nearer to the old station: cut here
        if walked + length >= total - walked - length:
            boundary = lid
            break
        walked += length
    return station, template, boundary
