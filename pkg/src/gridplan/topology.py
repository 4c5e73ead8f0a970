"""Switch-resolved connectivity, feeder decomposition and source paths.

A line conducts when it is in service and none of its sectioning switches is
open. Transformers conduct when in service. Parallel branches between the
same pair of buses count as one connection for meshing purposes, so a
parallel cable on an existing trail does not make a feeder meshed.

Station buses are the source bus and both terminals of every in-service
transformer. A *feeder* is a connected group of supplied non-station buses
together with the lines tying it to station buses (its root lines). A feeder
is meshed when its distinct connections outnumber its buses, i.e. it
contains a cycle or is fed from more than one point.
"""
from __future__ import annotations

from collections import defaultdict, deque
from dataclasses import dataclass

from .network import Network, ValidationReport, validate


class TopologyError(ValueError):
    pass


class InvalidNetworkError(TopologyError):
    def __init__(self, report: ValidationReport):
        self.report = report
        super().__init__(f"invalid network:\n{report}")


@dataclass(frozen=True)
class Feeder:
    root_lines: tuple[str, ...]
    buses: frozenset[str]
    meshed: bool


@dataclass(frozen=True)
class TopologyReport:
    supplied_bus_ids: frozenset[str]
    unsupplied_load_points: frozenset[str]
    meshed_load_points: frozenset[str]
    feeders: tuple[Feeder, ...]
    is_radial: bool

    @property
    def unsupplied_load_point_count(self) -> int:
        return len(self.unsupplied_load_points)

    @property
    def meshed_load_point_count(self) -> int:
        return len(self.meshed_load_points)


def conducting_lines(network: Network):
    open_lines = {sw.line_id for sw in network.switches if not sw.closed}
    return [ln for ln in network.lines if ln.in_service and ln.id not in open_lines]


def station_buses(network: Network) -> frozenset[str]:
    out = {network.source.bus}
    for tr in network.transformers:
        if tr.in_service:
            out.add(tr.hv_bus)
            out.add(tr.lv_bus)
    return frozenset(out)


def _adjacency(network: Network):
    adj: dict[str, list[tuple[str, str, str]]] = defaultdict(list)  # bus -> (nbr, kind, id)
    for ln in conducting_lines(network):
        adj[ln.from_bus].append((ln.to_bus, "line", ln.id))
        adj[ln.to_bus].append((ln.from_bus, "line", ln.id))
    for tr in network.transformers:
        if tr.in_service:
            adj[tr.hv_bus].append((tr.lv_bus, "trafo", tr.id))
            adj[tr.lv_bus].append((tr.hv_bus, "trafo", tr.id))
    return adj


def analyze_topology(network: Network, check: bool = True) -> TopologyReport:
    if check:
        report = validate(network)
        if not report.ok:
            raise InvalidNetworkError(report)

    adj = _adjacency(network)
    src = network.source.bus
    supplied = {src}
    queue = deque([src])
    while queue:
        b = queue.popleft()
        for nb, _, _ in adj[b]:
            if nb not in supplied:
                supplied.add(nb)
                queue.append(nb)

    stations = station_buses(network)
    load_points = network.load_points

    # global radiality over distinct bus pairs
    pairs = set()
    for b in supplied:
        for nb, _, _ in adj[b]:
            pairs.add((b, nb) if b < nb else (nb, b))
    is_radial = len(pairs) == len(supplied) - 1

    feeders = []
    meshed_lps: set[str] = set()
    seen: set[str] = set()
    for start in sorted(supplied - stations):
        if start in seen:
            continue
        members = {start}
        stack = [start]
        roots = set()
        links = set()
        while stack:
            b = stack.pop()
            for nb, kind, eid in adj[b]:
                if kind != "line":
                    continue
                links.add((b, nb) if b < nb else (nb, b))
                if nb in stations:
                    roots.add(eid)
                elif nb not in members:
                    members.add(nb)
                    stack.append(nb)
        seen |= members
        meshed = len(links) > len(members)
        feeders.append(Feeder(tuple(sorted(roots)), frozenset(members), meshed))
        if meshed:
            meshed_lps |= members & load_points

    return TopologyReport(
        supplied_bus_ids=frozenset(supplied),
        unsupplied_load_points=frozenset(load_points - supplied),
        meshed_load_points=frozenset(meshed_lps),
        feeders=tuple(feeders),
        is_radial=is_radial,
    )


def feeder_of(report: TopologyReport, bus: str) -> Feeder | None:
    for f in report.feeders:
        if bus in f.buses:
            return f
    return None


def path_to_source(network: Network, bus: str, report: TopologyReport | None = None) -> list[str]:
    """Line ids from ``bus`` up to the station bus feeding it.

    Station buses (source, transformer terminals) return an empty path.
    Raises :class:`TopologyError` for unsupplied buses or buses on a meshed
    feeder, where the path is not unique.
    """
    if report is None:
        report = analyze_topology(network)
    stations = station_buses(network)
    if bus in stations:
        if bus not in report.supplied_bus_ids:
            raise TopologyError(f"bus {bus} is not supplied")
        return []
    if bus not in report.supplied_bus_ids:
        raise TopologyError(f"bus {bus} is not supplied")
    feeder = feeder_of(report, bus)
    if feeder is None or feeder.meshed:
        raise TopologyError(f"bus {bus} lies on a meshed feeder; path to source is not unique")

    adj = _adjacency(network)
    parent: dict[str, tuple[str, str]] = {bus: ("", "")}
    queue = deque([bus])
    while queue:
        b = queue.popleft()
        for nb, kind, eid in sorted(adj[b]):
            if kind != "line" or nb in parent:
                continue
            parent[nb] = (b, eid)
            if nb in stations:
                path = []
                cur = nb
                while cur != bus:
                    prev, lid = parent[cur]
                    path.append(lid)
                    cur = prev
                return path[::-1]
            queue.append(nb)
    raise TopologyError(f"no path from bus {bus} to a station")  # pragma: no cover
