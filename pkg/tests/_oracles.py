"""Independent reference implementations used by the property and acceptance tests."""
import math

import networkx as nx
import numpy as np
from scipy.optimize import root

from gridplan.measures import satisfies_dependencies


def two_bus_voltage(p, q, r, x, v0):
    """Receiving-end magnitude of a slack bus feeding S = P + jQ through z = r + jx (per unit).

    |V|^4 + (2(rP + xQ) - V0^2)|V|^2 + |z|^2 |S|^2 = 0, larger root.
    """
    b = 2 * (r * p + x * q) - v0 ** 2
    c = (r * r + x * x) * (p * p + q * q)
    return math.sqrt((-b + math.sqrt(b * b - 4 * c)) / 2)


def nodal_oracle(net, case):
    """Full Newton-type solve of the nodal equations with scipy."""
    ids = [b.id for b in net.buses]
    k = {b: i for i, b in enumerate(ids)}
    n = len(ids)
    y = np.zeros((n, n), complex)
    for ln in net.lines:
        t = net.line_type(ln.std_type)
        vb = net.bus(ln.from_bus).nominal_voltage
        yl = 1 / (complex(t.r_per_km, t.x_per_km) * ln.length / vb ** 2)
        a, b = k[ln.from_bus], k[ln.to_bus]
        y[a, a] += yl
        y[b, b] += yl
        y[a, b] -= yl
        y[b, a] -= yl
    for tr in net.transformers:
        zk = tr.short_circuit_voltage / 100
        rk = tr.short_circuit_losses / 100
        z = complex(rk, math.sqrt(zk * zk - rk * rk)) / tr.rated_power
        m = 1 + tr.tap_position * tr.tap_step / 100
        h, l = k[tr.hv_bus], k[tr.lv_bus]
        y[h, h] += m * m / z
        y[l, l] += 1 / z
        y[h, l] -= m / z
        y[l, h] -= m / z
    s = np.zeros(n, complex)
    for ld in net.loads:
        s[k[ld.bus]] -= complex(ld.active_power, ld.reactive_power) * case.load_scale
    for g in net.generators:
        s[k[g.bus]] += complex(g.active_power, g.reactive_power) * case.generation_scale
    src = k[net.source.bus]
    others = [i for i in range(n) if i != src]

    def full(xv):
        v = np.empty(n, complex)
        v[src] = net.source.vm_pu
        v[others] = xv[: n - 1] + 1j * xv[n - 1:]
        return v

    def mismatch(xv):
        v = full(xv)
        d = (v * np.conj(y @ v) - s)[others]
        return np.concatenate([d.real, d.imag])

    guess = np.concatenate([np.full(n - 1, net.source.vm_pu), np.zeros(n - 1)])
    sol = root(mismatch, guess, method="hybr", tol=1e-13)
    # hybr may stop "without progress" at machine precision; judge by the residual
    assert np.max(np.abs(mismatch(sol.x))) < 1e-10
    return {ids[i]: abs(v) for i, v in enumerate(full(sol.x))}



def brute_force_topology(net):
    """Independent reference built on networkx graphs."""
    open_lines = {s.line_id for s in net.switches if not s.closed}
    g = nx.Graph()
    g.add_nodes_from(b.id for b in net.buses)
    stations = {net.source.bus}
    for ln in net.lines:
        if ln.in_service and ln.id not in open_lines:
            g.add_edge(ln.from_bus, ln.to_bus, kind="line")
    for tr in net.transformers:
        if tr.in_service:
            stations |= {tr.hv_bus, tr.lv_bus}
            g.add_edge(tr.hv_bus, tr.lv_bus, kind="trafo")
    supplied = nx.node_connected_component(g, net.source.bus)
    sub = g.subgraph(supplied)
    radial = nx.is_tree(nx.Graph(sub))
    lps = {ld.bus for ld in net.loads}
    meshed = set()
    inner = g.subgraph(supplied - stations)
    for comp in nx.connected_components(inner):
        links = {frozenset((a, b)) for a in comp for b in g[a] if g[a][b]["kind"] == "line"}
        if len(links) > len(comp):
            meshed |= comp & lps
    return supplied, lps - supplied, meshed, radial



def reference_cost(r, c):
    """Straight transcription of the five-level cascade."""
    if r.lp_us != 0:
        return (5, r.lp_us)
    elif r.lp_mf != 0:
        return (4, r.lp_mf)
    elif r.tr_ol != 0:
        return (3, r.tr_ol)
    elif r.ln_ol != 0:
        return (2, r.ln_ol)
    elif r.lp_vv != 0:
        return (1, r.lp_vv)
    return (0, c)



def random_reports(rng, n):
    def sparse(draw):
        return np.where(rng.random(n) < 0.6, 0, draw)

    return zip(
        sparse(rng.integers(1, 30, n)), sparse(rng.integers(1, 30, n)),
        sparse(rng.uniform(0, 50, n)), sparse(rng.uniform(0, 50, n)),
        sparse(rng.integers(1, 30, n)), rng.uniform(0, 1e6, n),
    )


def brute_neighbours(s, cat, mode):
    ids = cat.ids
    out = set()
    if mode.allow_remove:
        out |= {s - {m} for m in s}
    if mode.allow_add:
        out |= {s | {m} for m in ids if m not in s}
    if mode.allow_exchange:
        out |= {(s - {a}) | {b} for a in s for b in ids if b not in s}
    return {x for x in out if satisfies_dependencies(x, cat)}
