"""Data model for distribution networks.

All element classes are frozen dataclasses and a :class:`Network` holds them
in tuples, so a network value can be shared freely between evaluators.
Modified networks are produced with :func:`dataclasses.replace` (see
:mod:`gridplan.measures`).
"""
from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Iterable


class NetworkFormatError(ValueError):
    """Raised when a network file cannot be parsed into a :class:`Network`."""


@dataclass(frozen=True)
class Bus:
    id: str
    nominal_voltage: float  # kV
    is_switching_cabinet: bool = False
    position: tuple[float, float] | None = None  # metres


@dataclass(frozen=True)
class LineStandardType:
    name: str
    r_per_km: float
    x_per_km: float
    max_current: float  # kA
    cost_per_km: float
    diameter_rank: int


@dataclass(frozen=True)
class Line:
    id: str
    from_bus: str
    to_bus: str
    length: float  # km
    std_type: str
    max_loading: float = 100.0
    in_service: bool = True
    is_customer_access: bool = False


@dataclass(frozen=True)
class Transformer:
    id: str
    hv_bus: str
    lv_bus: str
    rated_power: float  # MVA
    short_circuit_voltage: float  # percent
    short_circuit_losses: float  # percent of rated power
    tap_position: int = 0
    tap_range: tuple[int, int] = (0, 0)
    tap_step: float = 2.5  # percent per step
    max_loading: float = 100.0
    in_service: bool = True


@dataclass(frozen=True)
class Switch:
    id: str
    line_id: str
    bus_id: str
    closed: bool = True


@dataclass(frozen=True)
class Load:
    id: str
    bus: str
    active_power: float  # MW
    reactive_power: float = 0.0  # MVar
    kind: str = "load"


# generators share the load record; their power is fed in, not consumed
Generator = Load


@dataclass(frozen=True)
class SourceRef:
    bus: str
    vm_pu: float = 1.0


@dataclass(frozen=True)
class Network:
    name: str
    buses: tuple[Bus, ...]
    lines: tuple[Line, ...]
    line_types: tuple[LineStandardType, ...]
    transformers: tuple[Transformer, ...]
    switches: tuple[Switch, ...]
    loads: tuple[Load, ...]
    generators: tuple[Load, ...]
    source: SourceRef

    # lookup tables are derived, excluded from equality and repr
    _index: dict = field(default=None, init=False, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "_index", {})

    def _lookup(self, attr: str, key: str = "id") -> dict:
        name = f"{attr}:{key}"
        table = self._index.get(name)
        if table is None:
            table = {getattr(e, key): e for e in getattr(self, attr)}
            self._index[name] = table
        return table

    def bus(self, bus_id: str) -> Bus:
        return self._lookup("buses")[bus_id]

    def line(self, line_id: str) -> Line:
        return self._lookup("lines")[line_id]

    def line_type(self, name: str) -> LineStandardType:
        return self._lookup("line_types", "name")[name]

    def transformer(self, trafo_id: str) -> Transformer:
        return self._lookup("transformers")[trafo_id]

    def switch(self, switch_id: str) -> Switch:
        return self._lookup("switches")[switch_id]

    @property
    def load_points(self) -> frozenset[str]:
        """Buses carrying at least one load element."""
        cached = self._index.get("load_points")
        if cached is None:
            cached = frozenset(ld.bus for ld in self.loads)
            self._index["load_points"] = cached
        return cached

    def replace(self, **changes) -> "Network":
        return dataclasses.replace(self, **changes)


# ---------------------------------------------------------------------------
# validation


@dataclass(frozen=True)
class Violation:
    element: str  # e.g. "line 3"
    message: str

    def __str__(self):
        return f"{self.element}: {self.message}"


@dataclass(frozen=True)
class ValidationReport:
    violations: tuple[Violation, ...] = ()

    @property
    def ok(self) -> bool:
        return not self.violations

    def __bool__(self):
        return self.ok

    def __str__(self):
        if self.ok:
            return "network valid"
        return "\n".join(str(v) for v in self.violations)


def _duplicates(ids: Iterable[str]) -> list[str]:
    seen, dup = set(), []
    for i in ids:
        if i in seen and i not in dup:
            dup.append(i)
        seen.add(i)
    return dup


def validate(network: Network) -> ValidationReport:
    """Collect every invariant violation of ``network``.

    Never raises for structural problems; an empty report means the network
    is valid.
    """
    out: list[Violation] = []
    add = lambda el, msg: out.append(Violation(el, msg))  # noqa: E731

    for cls, elements, key in (
        ("bus", network.buses, "id"),
        ("line", network.lines, "id"),
        ("line type", network.line_types, "name"),
        ("transformer", network.transformers, "id"),
        ("switch", network.switches, "id"),
        ("load", network.loads, "id"),
        ("generator", network.generators, "id"),
    ):
        for d in _duplicates(getattr(e, key) for e in elements):
            add(f"{cls} {d}", "duplicate id")

    bus_ids = {b.id for b in network.buses}
    type_names = {t.name for t in network.line_types}
    lines = {ln.id: ln for ln in network.lines}

    for b in network.buses:
        if not b.nominal_voltage > 0:
            add(f"bus {b.id}", "nominal_voltage must be positive")

    ranks = [t.diameter_rank for t in network.line_types]
    if len(set(ranks)) != len(ranks):
        add("line_types", "diameter_rank must strictly order the catalog")
    for t in network.line_types:
        if t.r_per_km < 0 or t.x_per_km < 0:
            add(f"line type {t.name}", "impedance must be non-negative")
        if not t.max_current > 0:
            add(f"line type {t.name}", "max_current must be positive")

    for ln in network.lines:
        el = f"line {ln.id}"
        for end in (ln.from_bus, ln.to_bus):
            if end not in bus_ids:
                add(el, f"references missing bus {end!r}")
        if ln.from_bus == ln.to_bus:
            add(el, "from_bus equals to_bus")
        if not ln.length > 0:
            add(el, "length must be positive")
        if not ln.max_loading > 0:
            add(el, "max_loading must be positive")
        if ln.std_type not in type_names:
            add(el, f"unknown std_type {ln.std_type!r}")

    for tr in network.transformers:
        el = f"transformer {tr.id}"
        for end in (tr.hv_bus, tr.lv_bus):
            if end not in bus_ids:
                add(el, f"references missing bus {end!r}")
        if tr.hv_bus == tr.lv_bus:
            add(el, "hv_bus equals lv_bus")
        if not tr.rated_power > 0:
            add(el, "rated_power must be positive")
        lo, hi = tr.tap_range
        if not lo <= tr.tap_position <= hi:
            add(el, f"tap_position {tr.tap_position} outside [{lo}, {hi}]")

    for sw in network.switches:
        el = f"switch {sw.id}"
        ln = lines.get(sw.line_id)
        if ln is None:
            add(el, f"references missing line {sw.line_id!r}")
        elif sw.bus_id not in (ln.from_bus, ln.to_bus):
            add(el, f"bus {sw.bus_id!r} is not an endpoint of line {ln.id}")
        if sw.bus_id not in bus_ids:
            add(el, f"references missing bus {sw.bus_id!r}")

    for cls, elements in (("load", network.loads), ("generator", network.generators)):
        for e in elements:
            if e.bus not in bus_ids:
                add(f"{cls} {e.id}", f"references missing bus {e.bus!r}")

    if network.source.bus not in bus_ids:
        add("source", f"references missing bus {network.source.bus!r}")
    if not network.source.vm_pu > 0:
        add("source", "vm_pu must be positive")

    return ValidationReport(tuple(out))


# ---------------------------------------------------------------------------
# JSON file format

_SECTIONS = {
    "buses": Bus,
    "lines": Line,
    "line_types": LineStandardType,
    "transformers": Transformer,
    "switches": Switch,
    "loads": Load,
    "generators": Load,
}
_TOP_KEYS = set(_SECTIONS) | {"source", "name"}
_TUPLE_FIELDS = {"position", "tap_range"}


def _build(cls, raw: Any, where: str):
    if not isinstance(raw, dict):
        raise NetworkFormatError(f"{where}: expected an object, got {type(raw).__name__}")
    names = {f.name for f in dataclasses.fields(cls) if f.init}
    unknown = sorted(set(raw) - names)
    if unknown:
        raise NetworkFormatError(f"{where}: unknown key {unknown[0]!r}")
    kwargs = {}
    for k, v in raw.items():
        if k in _TUPLE_FIELDS and v is not None:
            v = tuple(v)
        elif k in ("id", "bus", "from_bus", "to_bus", "hv_bus", "lv_bus", "line_id", "bus_id"):
            v = str(v)
        kwargs[k] = v
    try:
        return cls(**kwargs)
    except TypeError as exc:
        raise NetworkFormatError(f"{where}: {exc}") from None


def network_from_dict(data: dict) -> Network:
    if not isinstance(data, dict):
        raise NetworkFormatError("network file must contain a JSON object")
    unknown = sorted(set(data) - _TOP_KEYS)
    if unknown:
        raise NetworkFormatError(f"unknown key {unknown[0]!r}")
    if "source" not in data:
        raise NetworkFormatError("missing key 'source'")
    sections = {}
    for key, cls in _SECTIONS.items():
        items = data.get(key, [])
        if not isinstance(items, list):
            raise NetworkFormatError(f"{key}: expected a list")
        sections[key] = tuple(_build(cls, item, f"{key}[{i}]") for i, item in enumerate(items))
    source = _build(SourceRef, data["source"], "source")
    return Network(name=str(data.get("name", "network")), source=source, **sections)


def network_to_dict(network: Network) -> dict:
    def row(e):
        d = dataclasses.asdict(e)
        for k in _TUPLE_FIELDS & d.keys():
            if d[k] is not None:
                d[k] = list(d[k])
        return d

    out: dict[str, Any] = {"name": network.name}
    for key in _SECTIONS:
        out[key] = [row(e) for e in getattr(network, key)]
    out["source"] = row(network.source)
    return out


def load_network(path: str | Path) -> Network:
    """Read a network JSON file.

    Raises :class:`NetworkFormatError` with a line/column diagnostic for
    malformed JSON and a key diagnostic for schema problems.
    """
    text = Path(path).read_text(encoding="utf-8")
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise NetworkFormatError(
            f"{path}: invalid JSON at line {exc.lineno} column {exc.colno}: {exc.msg}"
        ) from None
    return network_from_dict(data)


def save_network(network: Network, path: str | Path) -> None:
    Path(path).write_text(json.dumps(network_to_dict(network), indent=2) + "\n", encoding="utf-8")
