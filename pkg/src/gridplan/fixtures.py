"""Synthetic networks used by the tests, the gallery scripts and the CLI demos.

``intro_ring`` is a 20 kV ring fed by a 110/20 kV transformer::

            HV (slack, 1.02 pu)
             |  T1
            MV0 ──L1── LP1 ──L2── LP2 ──L3── LP3
             |                                |
             └──L6── LP5 ──L5── LP4 ────L4────┘

Every load point station has one load-break switch per incoming line, ten in
total, numbered along the ring: line 1 carries switch 1 (at LP1), line 2
switches 2 and 3, line 3 switches 4 and 5, line 4 switches 6 and 7, line 5
switches 8 and 9, line 6 switch 10 (at LP5). Switch 6 is the normal
sectioning point. Line lengths in km equal their replacement cost because the
upgrade cable costs 1 per km.
"""
from __future__ import annotations

import math

from .network import (
    Bus,
    Line,
    LineStandardType,
    Load,
    Network,
    SourceRef,
    Switch,
    Transformer,
)
from .powerflow import LoadCase

RING_LENGTHS = {"1": 2.0, "2": 7.0, "3": 3.0, "4": 3.0, "5": 3.0, "6": 4.0}
RING_PV_MW = 2.55
RING_LOAD_MW = 0.4

MV_TYPES = (
    LineStandardType("NA2XS2Y 1x95", r_per_km=0.32, x_per_km=0.12, max_current=0.6, cost_per_km=1.0, diameter_rank=1),
    LineStandardType("NA2XS2Y 1x240", r_per_km=0.125, x_per_km=0.105, max_current=0.8, cost_per_km=1.0, diameter_rank=2),
)

HIGH_FEED_IN = LoadCase("high_feed_in", load_scale=0.25, generation_scale=1.0, v_min=0.9, v_max=1.05)
HIGH_LOAD = LoadCase("high_load", load_scale=1.0, generation_scale=0.0, v_min=0.9, v_max=1.05)


def intro_ring(
    pv_mw: float = RING_PV_MW,
    load_mw: float = RING_LOAD_MW,
    sectioning_switch: str | None = "6",
    with_pv: bool = True,
) -> Network:
    """The introductory ring; ``sectioning_switch=None`` leaves all switches closed."""
    buses = [Bus("HV", 110.0), Bus("MV0", 20.0, is_switching_cabinet=True)]
    buses += [Bus(f"LP{k}", 20.0, is_switching_cabinet=True) for k in range(1, 6)]
    ring = ["MV0", "LP1", "LP2", "LP3", "LP4", "LP5", "MV0"]
    lines = [
        Line(str(k), ring[k - 1], ring[k], RING_LENGTHS[str(k)], MV_TYPES[0].name)
        for k in range(1, 7)
    ]
    # switches sit at load point ends only; MV0 feeder bays are breakers
    ends = []
    for ln in lines:
        for b in (ln.from_bus, ln.to_bus):
            if b != "MV0":
                ends.append((ln.id, b))
    switches = [
        Switch(str(i), line_id, bus, closed=(str(i) != sectioning_switch))
        for i, (line_id, bus) in enumerate(ends, start=1)
    ]
    trafo = Transformer(
        "T1", "HV", "MV0", rated_power=40.0, short_circuit_voltage=12.0,
        short_circuit_losses=0.5, tap_position=0, tap_range=(-5, 5), tap_step=2.5,
    )
    loads = [Load(f"L{k}", f"LP{k}", load_mw, load_mw * 0.25) for k in range(1, 6)]
    gens = [Load(f"PV{k}", f"LP{k}", pv_mw, 0.0, kind="pv") for k in range(1, 6)] if with_pv else []
    return Network(
        name="intro_ring",
        buses=tuple(buses),
        lines=tuple(lines),
        line_types=MV_TYPES,
        transformers=(trafo,),
        switches=tuple(switches),
        loads=tuple(loads),
        generators=tuple(gens),
        source=SourceRef("HV", 1.02),
    )


def intro_cases() -> list[LoadCase]:
    return [HIGH_FEED_IN]


# ---------------------------------------------------------------------------
# topology optimisation grid
#
#                 B3
#                 |
#                 B2
#                 |
#       C3 ·····  B1 ····· D1          ···· candidate trails
#       |         |        |  ·
#  C2 ──C1 ────── S ────── A1 ── A2 ── A3
#                 |
#                 HV
#
# Lines c3 (C2-C3), d1 (A1-D1) and a3 (A2-A3) are old and must be renewed
# or taken out of operation. Cable routes are longer than the airline.

TRAIL_TYPES = (
    LineStandardType("NA2XS2Y 1x150", r_per_km=0.206, x_per_km=0.116, max_current=0.32, cost_per_km=1.0, diameter_rank=1),
    LineStandardType("NA2XS2Y 1x240", r_per_km=0.125, x_per_km=0.105, max_current=0.42, cost_per_km=1.3, diameter_rank=2),
)
TRAIL_POSITIONS = {
    "HV": (0.0, -50.0), "S": (0.0, 0.0),
    "A1": (1000.0, 0.0), "A2": (2000.0, 0.0), "A3": (3000.0, 0.0), "D1": (1000.0, 1000.0),
    "B1": (0.0, 1000.0), "B2": (0.0, 2000.0), "B3": (0.0, 3000.0),
    "C1": (-1000.0, 0.0), "C2": (-2000.0, 0.0), "C3": (-1000.0, 1000.0),
}
TRAIL_LINES = {  # id: (from, to, km)
    "a1": ("S", "A1", 1.1), "a2": ("A1", "A2", 1.1), "a3": ("A2", "A3", 1.2), "d1": ("A1", "D1", 1.8),
    "b1": ("S", "B1", 1.1), "b2": ("B1", "B2", 1.1), "b3": ("B2", "B3", 1.1),
    "c1": ("S", "C1", 1.1), "c2": ("C1", "C2", 1.1), "c3": ("C2", "C3", 2.4),
}
TRAIL_DECOMMISSION = ("a3", "c3", "d1")
TRAIL_CANDIDATES = (("D1", "B1"), ("C3", "B1"), ("A3", "D1"))


def trail_grid(load_mw: float = 0.3) -> Network:
    """12-bus 20 kV grid for topology optimisation with new line trails."""
    buses = [Bus("HV", 110.0, position=TRAIL_POSITIONS["HV"]),
             Bus("S", 20.0, is_switching_cabinet=True, position=TRAIL_POSITIONS["S"])]
    buses += [Bus(b, 20.0, is_switching_cabinet=True, position=p)
              for b, p in TRAIL_POSITIONS.items() if b not in ("HV", "S")]
    lines = [Line(k, a, b, km, TRAIL_TYPES[0].name) for k, (a, b, km) in TRAIL_LINES.items()]
    switches = [Switch(f"sw_{k}", k, b) for k, (a, b, km) in TRAIL_LINES.items()]
    trafo = Transformer("T1", "HV", "S", rated_power=25.0, short_circuit_voltage=12.0,
                        short_circuit_losses=0.5, tap_range=(-5, 5))
    loads = [Load(f"L_{b.id}", b.id, load_mw, load_mw * 0.3) for b in buses[2:]]
    return Network(
        name="trail_grid", buses=tuple(buses), lines=tuple(lines), line_types=TRAIL_TYPES,
        transformers=(trafo,), switches=tuple(switches), loads=tuple(loads), generators=(),
        source=SourceRef("HV", 1.0),
    )


def trail_rules():
    from .measures import LineTrail, PlanningRules

    return PlanningRules(
        enable=frozenset({"replace_line", "open_switch", "new_line_trail"}),
        line_trails=tuple(LineTrail(a, b, TRAIL_TYPES[0].name) for a, b in TRAIL_CANDIDATES),
        decommission_lines=TRAIL_DECOMMISSION,
        trail_factor=1.5,
    )


def trail_cases() -> list[LoadCase]:
    return [HIGH_LOAD]


# ---------------------------------------------------------------------------
# study scenarios on the PV-free ring. With a shared master seed the
# progressive draws start with the conservative ones, so per bus the
# progressive installation nearly contains the conservative one.


def ring_study_base() -> Network:
    return intro_ring(with_pv=False)


def ring_rules():
    from .measures import PlanningRules

    return PlanningRules(enable=frozenset({"replace_line", "open_switch"}))


def ring_scenarios():
    from .scenarios import ResScenario

    return (
        ResScenario("conservative", 10.0, unit_size_range=(0.2, 0.8)),
        ResScenario("progressive", 13.0, unit_size_range=(0.2, 0.8)),
    )


# ---------------------------------------------------------------------------
# LV feeder for measure discovery
#
#   MV ─T1─ ST ──m1── K1 ──m2── J1 ──m3── K2
#                     |                    |
#                     a1 (30 m)            a2 (60 m)
#                     |                    |
#                     C1                   C2
#
# ST, K1 and K2 are cabinets (ST is also the station), J1 is a plain joint.

LV_TYPES = (
    LineStandardType("NAYY 4x95", r_per_km=0.32, x_per_km=0.08, max_current=0.245, cost_per_km=80.0, diameter_rank=1),
    LineStandardType("NAYY 4x150", r_per_km=0.206, x_per_km=0.08, max_current=0.315, cost_per_km=100.0, diameter_rank=2),
    LineStandardType("NAYY 4x240", r_per_km=0.125, x_per_km=0.08, max_current=0.41, cost_per_km=130.0, diameter_rank=3),
)


def lv_feeder(load_mw: float = 0.09) -> Network:
    pos = {"MV": (0.0, -5.0), "ST": (0.0, 0.0), "K1": (200.0, 0.0), "J1": (300.0, 50.0),
           "K2": (400.0, 0.0), "C1": (210.0, 30.0), "C2": (420.0, 55.0)}
    cab = {"ST", "K1", "K2"}
    buses = [Bus("MV", 20.0, position=pos["MV"])]
    buses += [Bus(b, 0.4, is_switching_cabinet=b in cab, position=pos[b]) for b in ("ST", "K1", "J1", "K2", "C1", "C2")]
    t = LV_TYPES[0].name
    lines = (
        Line("m1", "ST", "K1", 0.2, t), Line("m2", "K1", "J1", 0.11, t), Line("m3", "J1", "K2", 0.11, t),
        Line("a1", "K1", "C1", 0.03, t, is_customer_access=True),
        Line("a2", "K2", "C2", 0.06, t, is_customer_access=True),
    )
    trafo = Transformer("T1", "MV", "ST", rated_power=0.4, short_circuit_voltage=4.0,
                        short_circuit_losses=1.0, tap_range=(-2, 2))
    loads = tuple(Load(f"L_{b}", b, load_mw, load_mw * 0.2) for b in ("K1", "C1", "C2"))
    return Network("lv_feeder", tuple(buses), lines, LV_TYPES, (trafo,), (), loads, (), SourceRef("MV", 1.0))
