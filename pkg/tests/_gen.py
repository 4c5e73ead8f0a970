"""Random network generators shared by the property tests."""
from __future__ import annotations

import itertools

import numpy as np

from gridplan.measures import Measure, MeasureCatalog
from gridplan.network import Bus, Line, LineStandardType, Load, Network, SourceRef, Switch, Transformer

TYPES = (
    LineStandardType("small", 0.32, 0.12, 0.3, 1.0, 1),
    LineStandardType("big", 0.125, 0.105, 0.5, 2.0, 2),
)


def random_network(rng: np.random.Generator, max_buses: int = 20) -> Network:
    """Arbitrary topology: cycles, parallels, islands, open switches, dead lines."""
    n = int(rng.integers(2, max_buses + 1))
    buses = [Bus(f"b{i}", 20.0) for i in range(n)]
    lines, switches = [], []
    for k in range(int(rng.integers(0, 2 * n))):
        a, b = rng.choice(n, size=2, replace=False)
        lid = f"l{k}"
        lines.append(Line(lid, f"b{a}", f"b{b}", float(rng.uniform(0.1, 2.0)), TYPES[0].name,
                          in_service=bool(rng.random() > 0.1)))
        if rng.random() < 0.3:
            switches.append(Switch(f"s{k}", lid, f"b{b}", closed=bool(rng.random() > 0.5)))
    trafos = []
    for k in range(int(rng.integers(0, 3))):
        a, b = rng.choice(n, size=2, replace=False)
        trafos.append(Transformer(f"t{k}", f"b{a}", f"b{b}", 10.0, 6.0, 0.5, in_service=bool(rng.random() > 0.2)))
    loads = [Load(f"ld{i}", f"b{i}", 0.1) for i in range(n) if rng.random() < 0.6]
    return Network("random", tuple(buses), tuple(lines), TYPES, tuple(trafos), tuple(switches),
                   tuple(loads), (), SourceRef("b0"))


def random_radial(rng: np.random.Generator, max_buses: int = 10, with_trafo: bool | None = None) -> Network:
    """A supplied radial 20 kV tree, optionally behind a 110/20 kV transformer, with PQ loads and PV."""
    n = int(rng.integers(2, max_buses + 1))
    if with_trafo is None:
        with_trafo = bool(rng.random() < 0.5)
    buses = [Bus("b0", 110.0 if with_trafo else 20.0)]
    trafos = []
    first = 0
    if with_trafo:
        buses.append(Bus("b1", 20.0))
        hv, lv = ("b0", "b1")
        tap = int(rng.integers(-3, 4))
        trafos.append(Transformer("t0", hv, lv, float(rng.uniform(5, 40)), float(rng.uniform(4, 12)),
                                  float(rng.uniform(0.2, 1.0)), tap_position=tap, tap_range=(-3, 3)))
        first = 1
    lines = []
    for i in range(len(buses), n):
        parent = int(rng.integers(first, i))
        buses.append(Bus(f"b{i}", 20.0))
        t = TYPES[int(rng.integers(2))]
        lines.append(Line(f"l{i}", f"b{parent}", f"b{i}", float(rng.uniform(0.1, 3.0)), t.name))
        if rng.random() < 0.15:
            lines.append(Line(f"l{i}p", f"b{i}", f"b{parent}", float(rng.uniform(0.1, 3.0)), TYPES[1].name))
    loads, gens = [], []
    for b in buses[first + 1:]:
        if rng.random() < 0.8:
            loads.append(Load(f"ld_{b.id}", b.id, float(rng.uniform(0, 0.8)), float(rng.uniform(-0.1, 0.3))))
        if rng.random() < 0.4:
            gens.append(Load(f"pv_{b.id}", b.id, float(rng.uniform(0, 1.0)), 0.0, kind="pv"))
    return Network("radial", tuple(buses), tuple(lines), TYPES, tuple(trafos), (),
                   tuple(loads), tuple(gens), SourceRef("b0", float(rng.uniform(0.98, 1.04))))


def random_catalog(rng, n=None):
    n = int(rng.integers(2, 10)) if n is None else n
    ids = [f"m{i}" for i in range(n)]
    measures = tuple(Measure(i, "replace_line", (i,), float(rng.integers(0, 10))) for i in ids)
    excludes = {frozenset(p) for p in itertools.combinations(ids, 2) if rng.random() < 0.15}
    requires = {}
    for i in ids:
        if rng.random() < 0.2:
            others = [j for j in ids if j != i]
            requires[i] = frozenset(rng.choice(others, size=min(len(others), int(rng.integers(1, 3))), replace=False).tolist())
    groups = tuple(frozenset(rng.choice(ids, size=min(n, int(rng.integers(1, 4))), replace=False).tolist())
                   for _ in range(int(rng.integers(0, 3))))
    return MeasureCatalog(measures, frozenset(excludes), requires, groups)
