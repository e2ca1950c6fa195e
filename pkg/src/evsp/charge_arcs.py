"""Station sequences, charging arcs and the per-depot multigraphs.

A charging arc between two tasks is a station sequence whose battery effect
is summarised by two monotone maps: ``fc`` (exit level as a function of the
entry level under the optimal schedule) and its generalized inverse ``bc``
(minimum entry level for a required exit level).
"""
from __future__ import annotations

import bisect
import math
from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence

from .model import EPS, NEG_INF, POS_INF, Instance, LinearCharge, pos

DEFAULT_MAX_STATIONS = 3


@dataclass(frozen=True)
class StationSequence:
    """Element indices ``tail -> stations... -> head`` and the sequence cost."""
    tail: int
    head: int
    stations: tuple
    cost: float

    @property
    def nodes(self) -> tuple:
        return (self.tail,) + tuple(self.stations) + (self.head,)


@dataclass
class Stop:
    station: int
    arrival: float
    departure: float
    level_arrival: float
    level_departure: float


@dataclass
class Schedule:
    stops: list
    level_out: float
    departure: float  # departure time from the tail
    arrival: float    # arrival time at the head

    @property
    def feasible(self) -> bool:
        return self.level_out != NEG_INF


def sequence_cost(inst: Instance, nodes: Sequence[int]) -> float:
    c = inst.cost
    return sum(c[a][b] for a, b in zip(nodes, nodes[1:])) + inst.service_cost(nodes[-1])


def window_ok(inst: Instance, nodes: Sequence[int]) -> bool:
    d = inst.delta
    travel = sum(d[a][b] for a, b in zip(nodes, nodes[1:]))
    return inst.t_end(nodes[0]) + travel <= inst.t_begin(nodes[-1]) + EPS


def legs_ok(inst: Instance, nodes: Sequence[int]) -> bool:
    """Every leg can be driven starting with a full battery."""
    e, M = inst.e, inst.capacity
    if len(nodes) == 2:
        return e[nodes[0]][nodes[1]] + inst.energy(nodes[1]) <= M + EPS
    if any(e[a][b] > M + EPS for a, b in zip(nodes[:-2], nodes[1:-1])):
        return False
    return e[nodes[-2]][nodes[-1]] + inst.energy(nodes[-1]) <= M + EPS


def make_sequence(inst: Instance, tail: int, head: int, stations: Iterable[int] = ()) -> StationSequence:
    stations = tuple(stations)
    nodes = (tail,) + stations + (head,)
    if not window_ok(inst, nodes):
        raise ValueError(f"station sequence {nodes} violates the time window")
    return StationSequence(tail, head, stations, sequence_cost(inst, nodes))


# ---------------------------------------------------------------------------
# optimal schedule (minimal dwell everywhere except the last station)

def _forward(inst: Instance, nodes: Sequence[int], level_in: float, stops: Optional[list] = None) -> float:
    u, v = nodes[0], nodes[-1]
    k = len(nodes) - 2
    e, d = inst.e, inst.delta
    model = inst.charge
    ev = inst.energy(v)
    if level_in == NEG_INF:
        return NEG_INF
    if k == 0:
        return pos(level_in - e[u][v] - ev)
    t = inst.t_end(u)
    level = level_in
    for i in range(1, k + 1):
        s, prev = nodes[i], nodes[i - 1]
        t += d[prev][s]
        level = pos(level - e[prev][s])
        if level == NEG_INF:
            return NEG_INF
        arr, lev_arr = t, level
        if i < k:
            need = e[s][nodes[i + 1]]
            if level < need:
                th = model.theta(need)
                if th == POS_INF:
                    return NEG_INF
                t += th - model.theta(level)
                level = need
        else:
            dep = inst.t_begin(v) - d[s][v]
            if dep < t - EPS:
                return NEG_INF
            level = model.phi(level, max(0.0, dep - t))
            t = dep
        if stops is not None:
            stops.append(Stop(s, arr, t, lev_arr, level))
    return pos(level - e[nodes[k]][v] - ev)


def optimal_schedule(inst: Instance, seq: StationSequence, level_in: float) -> Schedule:
    """Optimal schedule of ``seq`` for a given level at the end of its tail."""
    nodes = seq.nodes
    if not window_ok(inst, nodes):
        raise ValueError(f"station sequence {nodes} violates the time window")
    stops: list = []
    level_out = _forward(inst, nodes, level_in, stops)
    t0 = inst.t_end(seq.tail)
    if stops:
        arrival = stops[-1].departure + inst.delta[stops[-1].station][seq.head]
    else:
        arrival = t0 + inst.delta[seq.tail][seq.head]
    if level_out == NEG_INF:
        arrival = POS_INF
    return Schedule(stops, level_out, t0, arrival)


def _backward(inst: Instance, nodes: Sequence[int], level_out: float) -> float:
    """Minimum entry level reaching the head with ``level_out`` (backward walk).

    Walks the stations from last to first, assuming the vehicle arrives empty
    and as late as possible, until it finds the station where it must arrive
    at its earliest time with a positive level.
    """
    u, v = nodes[0], nodes[-1]
    k = len(nodes) - 2
    e, d = inst.e, inst.delta
    M = inst.capacity
    model = inst.charge
    ev = inst.energy(v)
    if level_out == POS_INF:
        return POS_INF
    level_out = max(level_out, 0.0)
    if k == 0:
        need = level_out + e[u][v] + ev
        return min(need, M) if need <= M + EPS else POS_INF
    if level_out > M - e[nodes[k]][v] - ev + EPS:
        return POS_INF
    earliest = [inst.t_end(u)]
    energy = [0.0]
    for i in range(1, k + 1):
        earliest.append(earliest[-1] + d[nodes[i - 1]][nodes[i]])
        energy.append(energy[-1] + e[nodes[i - 1]][nodes[i]])
    dep = inst.t_begin(v) - d[nodes[k]][v]
    for i in range(k, 0, -1):
        s = nodes[i]
        need = level_out + e[s][v] + ev if i == k else e[s][nodes[i + 1]]
        need = min(need, M)
        th_need = model.theta(need)
        if th_need == POS_INF:
            return POS_INF
        window = dep - earliest[i]
        if window < -EPS:
            return POS_INF
        latest_empty = dep - th_need
        if latest_empty > earliest[i]:
            dep = latest_empty - d[nodes[i - 1]][s]
            continue
        arrive = model.level_at(th_need - window) if th_need > window else 0.0
        l0 = arrive + energy[i]
        return min(l0, M) if l0 <= M + EPS else POS_INF
    return e[u][nodes[1]]


# ---------------------------------------------------------------------------
# charge maps

class LinearArcCharge:
    """Closed-form maps under linear recharge.

    ``rb``: minimum entry level, ``re``: exit level from a full battery,
    ``delta``: gain when entering at ``rb``.
    """

    __slots__ = ("rb", "re", "delta")

    def __init__(self, rb: float, re: float, delta: float):
        self.rb, self.re, self.delta = rb, re, delta

    def fc(self, level: float) -> float:
        if level < self.rb - EPS:
            return NEG_INF
        out = min(self.re, level + self.delta)
        return out if out > 0.0 else 0.0

    def bc(self, level: float) -> float:
        if level > self.re + EPS:
            return POS_INF
        lv = level - self.delta
        return lv if lv > self.rb else self.rb

    @property
    def feasible(self) -> bool:
        return self.rb <= self.re - self.delta + EPS and self.re >= -EPS

    def points(self, capacity: float) -> list:
        pts = [self.rb, capacity]
        kink = self.re - self.delta
        if self.rb < kink < capacity:
            pts.insert(1, kink)
        return pts

    def __repr__(self):
        return f"LinearArcCharge(rb={self.rb:.6g}, re={self.re:.6g}, delta={self.delta:.6g})"


class GeneralArcCharge:
    """Exact piecewise-linear table of ``fc`` for a concave charge profile.

    The table abscissae are all entry levels where the optimal schedule can
    change structure, so ``fc`` is linear between consecutive entries.
    ``bc`` uses the backward walk of the optimal schedule.
    """

    __slots__ = ("inst", "nodes", "xs", "ys", "rb", "re")

    def __init__(self, inst: Instance, nodes: Sequence[int]):
        self.inst = inst
        self.nodes = tuple(nodes)
        M = inst.capacity
        self.rb = _backward(inst, self.nodes, 0.0)
        if self.rb == POS_INF or self.rb > M + EPS:
            self.xs, self.ys = [], []
            self.rb, self.re = POS_INF, NEG_INF
            return
        xs = _fc_candidates(inst, self.nodes, self.rb)
        ys = [_forward(inst, self.nodes, x) for x in xs]
        # fc is -inf only below rb; guard tolerance-edge evaluations
        ys = [y if y != NEG_INF else 0.0 for y in ys]
        self.xs, self.ys = xs, ys
        self.re = ys[-1]

    @property
    def feasible(self) -> bool:
        return bool(self.xs)

    def fc(self, level: float) -> float:
        xs = self.xs
        if not xs or level < self.rb - EPS:
            return NEG_INF
        if level <= xs[0]:
            return self.ys[0]
        if level >= xs[-1]:
            return self.ys[-1]
        i = bisect.bisect_right(xs, level)
        x0, x1, y0, y1 = xs[i - 1], xs[i], self.ys[i - 1], self.ys[i]
        return y0 + (y1 - y0) * (level - x0) / (x1 - x0)

    def bc(self, level: float) -> float:
        if not self.xs:
            return POS_INF
        r = _backward(self.inst, self.nodes, level)
        if r == POS_INF:
            return r
        return r if r > self.rb else self.rb

    def points(self, capacity: float) -> list:
        return list(self.xs)


def _fc_candidates(inst: Instance, nodes: Sequence[int], rb: float) -> list:
    """Entry levels in [rb, M] containing every breakpoint of fc."""
    M = inst.capacity
    e = inst.e
    profile_levels = [lv for _, lv in inst.charge.breakpoints()]
    cands = {rb, M}
    energy = 0.0
    for i in range(1, len(nodes) - 1):
        energy += e[nodes[i - 1]][nodes[i]]
        cands.add(energy)
        for lv in profile_levels:
            cands.add(energy + lv)
    xs = sorted(x for x in cands if rb <= x <= M)
    k = len(nodes) - 2
    if k >= 1:
        # kinks of the final charge where the virtual charging time at the
        # last station crosses a profile breakpoint time
        g = [_last_station_theta(inst, nodes, x) for x in xs]
        extra = []
        for tau in (t for t, _ in inst.charge.breakpoints()[1:]):
            for (x0, g0), (x1, g1) in zip(zip(xs, g), zip(xs[1:], g[1:])):
                if g0 is None or g1 is None:
                    continue
                if (g0 - tau) * (g1 - tau) < 0:
                    extra.append(x0 + (tau - g0) * (x1 - x0) / (g1 - g0))
        xs = sorted(set(xs).union(extra))
    return xs


def _last_station_theta(inst: Instance, nodes: Sequence[int], level_in: float):
    """Virtual time reached at the end of charging at the last station."""
    e, d = inst.e, inst.delta
    model = inst.charge
    k = len(nodes) - 2
    t = inst.t_end(nodes[0])
    level = level_in
    for i in range(1, k + 1):
        s, prev = nodes[i], nodes[i - 1]
        t += d[prev][s]
        level = level - e[prev][s]
        if level < -EPS:
            return None
        level = max(level, 0.0)
        if i < k:
            need = e[s][nodes[i + 1]]
            if level < need:
                t += model.theta(need) - model.theta(level)
                level = need
    dep = inst.t_begin(nodes[-1]) - d[nodes[k]][nodes[-1]]
    return model.theta(level) + (dep - t)


def linear_params(inst: Instance, seq: StationSequence) -> LinearArcCharge:
    """Closed-form (rb, re, delta) triple under linear recharge."""
    if not isinstance(inst.charge, LinearCharge):
        raise TypeError("linear_params requires a linear charge model")
    nodes = seq.nodes
    if not window_ok(inst, nodes):
        raise ValueError(f"station sequence {nodes} violates the time window")
    return _linear_triple(inst, nodes)


def _linear_triple(inst: Instance, nodes: Sequence[int]) -> LinearArcCharge:
    e, d = inst.e, inst.delta
    M = inst.capacity
    alpha = inst.charge.rate
    u, v = nodes[0], nodes[-1]
    ev = inst.energy(v)
    k = len(nodes) - 2
    if k == 0:
        used = e[u][v] + ev
        return LinearArcCharge(used, M - used, -used)
    legs = list(zip(nodes, nodes[1:]))
    travel = sum(d[a][b] for a, b in legs)
    energy_to_last = sum(e[a][b] for a, b in legs[:-1])
    available = alpha * (inst.t_begin(v) - inst.t_end(u) - travel)
    gain_unclamped = available - energy_to_last - e[nodes[k]][v] - ev
    rb = max(e[u][nodes[1]], -gain_unclamped)
    re = min(M, M + available - energy_to_last) - e[nodes[k]][v] - ev
    return LinearArcCharge(rb, re, min(gain_unclamped, re - rb))


def arc_charge(inst: Instance, nodes: Sequence[int]):
    if isinstance(inst.charge, LinearCharge):
        return _linear_triple(inst, nodes)
    if len(nodes) == 2:
        # no charging: same closed form for every charge model
        return _linear_triple_nocharge(inst, nodes)
    return GeneralArcCharge(inst, nodes)


def _linear_triple_nocharge(inst: Instance, nodes) -> LinearArcCharge:
    used = inst.e[nodes[0]][nodes[1]] + inst.energy(nodes[1])
    return LinearArcCharge(used, inst.capacity - used, -used)


# ---------------------------------------------------------------------------
# arcs

@dataclass(eq=False)
class ChargeArc:
    """Arc of a depot multigraph. ``tail``/``head`` are graph vertices."""
    tail: int
    head: int
    stations: tuple
    cost: float
    charge: object
    id: int = -1

    @property
    def is_charging(self) -> bool:
        return bool(self.stations)

    def fc(self, level: float) -> float:
        return self.charge.fc(level)

    def bc(self, level: float) -> float:
        return self.charge.bc(level)

    def __repr__(self):
        return (f"ChargeArc({self.tail}->{self.head}, stations={self.stations}, "
                f"cost={self.cost:.6g}, {self.charge!r})")


def fc_eval(arc, level_in: float) -> float:
    """Exit level of ``arc`` for entry level ``level_in`` (-inf if infeasible)."""
    if level_in == NEG_INF:
        return NEG_INF
    return arc.charge.fc(level_in)


def bc_eval(arc, level_out: float) -> float:
    """Minimum entry level to leave ``arc`` with at least ``level_out``."""
    if level_out == POS_INF:
        return POS_INF
    return arc.charge.bc(level_out)


def dominates(a, b, capacity: float, tol: float = 1e-9) -> bool:
    """``a`` costs no more than ``b`` and ``fc_a >= fc_b`` pointwise."""
    if a.cost > b.cost + tol:
        return False
    ca, cb = a.charge, b.charge
    if ca.rb > cb.rb + tol:
        return False
    pts = set(cb.points(capacity))
    pts.update(x for x in ca.points(capacity) if x >= cb.rb)
    for x in pts:
        if ca.fc(x) < cb.fc(x) - tol:
            return False
    return True


# ---------------------------------------------------------------------------
# Pareto enumeration of station sequences

class _Prefix:
    __slots__ = ("stations", "cost", "travel", "e_first", "key", "depth")

    def __init__(self, stations, cost, travel, e_first, key):
        self.stations = stations
        self.cost = cost
        self.travel = travel
        self.e_first = e_first
        self.key = key
        self.depth = len(stations)


def _prefix_state(inst: Instance, nodes: Sequence[int], level_in: float):
    """(arrival time, arrival level) at the last node of a station prefix."""
    e, d = inst.e, inst.delta
    model = inst.charge
    t = inst.t_end(nodes[0])
    level = level_in
    for i in range(1, len(nodes)):
        s, prev = nodes[i], nodes[i - 1]
        if i > 1:
            need = e[prev][s]
            if level < need:
                t += model.theta(need) - model.theta(level)
                level = need
        t += d[prev][s]
        level = level - e[prev][s]
        if level < -EPS:
            return None
        level = max(level, 0.0)
    return t, level


def _general_prefix_dominates(inst: Instance, u: int, p: _Prefix, q: _Prefix) -> bool:
    """Arrival (level, time) of ``p`` is at least as good as ``q`` for every entry level."""
    if p.cost > q.cost + 1e-9 or p.e_first > q.e_first + 1e-9 or p.depth > q.depth:
        return False
    M = inst.capacity
    model = inst.charge
    if model.max_level < M:
        return False
    levels = [lv for _, lv in model.breakpoints()]
    cands = {q.e_first, M}
    for pref in (p, q):
        nodes = (u,) + pref.stations
        energy = 0.0
        for a, b in zip(nodes, nodes[1:]):
            energy += inst.e[a][b]
            cands.add(energy)
            cands.update(energy + lv for lv in levels)
    for x in cands:
        if not (q.e_first <= x <= M):
            continue
        sq = _prefix_state(inst, (u,) + q.stations, x)
        if sq is None:
            continue
        sp = _prefix_state(inst, (u,) + p.stations, x)
        if sp is None:
            return False
        if sp[0] - model.theta(sp[1]) > sq[0] - model.theta(sq[1]) + 1e-9:
            return False
    return True


def enumerate_nondominated(inst: Instance, u: int, v: int,
                           max_stations: int = DEFAULT_MAX_STATIONS) -> list:
    """Complete set of mutually non-dominated station sequences from u to v.

    Returns ``ChargeArc`` objects whose ``tail``/``head`` are element indices.
    """
    d, e, c = inst.delta, inst.e, inst.cost
    M = inst.capacity
    t0, t1 = inst.t_end(u), inst.t_begin(v)
    if t0 + d[u][v] > t1 + EPS:
        return []
    linear = isinstance(inst.charge, LinearCharge)
    alpha = inst.charge.rate if linear else None
    ev, cv = inst.energy(v), inst.service_cost(v)

    candidates = []
    if legs_ok(inst, (u, v)):
        ch = _linear_triple_nocharge(inst, (u, v))
        if ch.feasible:
            candidates.append(ChargeArc(u, v, (), c[u][v] + cv, ch))

    stations = list(inst.station_nodes)
    fronts: dict = {s: [] for s in stations}
    layer = []
    for s in stations:
        if e[u][s] > M + EPS or t0 + d[u][s] + d[s][v] > t1 + EPS:
            continue
        key = e[u][s] + alpha * d[u][s] if linear else None
        layer.append(_Prefix((s,), c[u][s], d[u][s], e[u][s], key))
    depth = 1
    while layer and depth <= max_stations:
        kept = []
        for p in layer:
            s = p.stations[-1]
            front = fronts[s]
            if any(_prefix_dominates(inst, u, q, p, linear) for q in front):
                continue
            front[:] = [q for q in front if not _prefix_dominates(inst, u, p, q, linear)]
            front.append(p)
            kept.append(p)
        nxt = []
        for p in kept:
            s = p.stations[-1]
            if depth < max_stations:
                for s2 in stations:
                    if s2 == s or e[s][s2] > M + EPS:
                        continue
                    travel = p.travel + d[s][s2]
                    if t0 + travel + d[s2][v] > t1 + EPS:
                        continue
                    key = p.key + e[s][s2] + alpha * d[s][s2] if linear else None
                    nxt.append(_Prefix(p.stations + (s2,), p.cost + c[s][s2], travel,
                                       p.e_first, key))
        layer = nxt
        depth += 1

    for s, front in fronts.items():
        for p in front:
            if e[s][v] + ev > M + EPS:
                continue
            nodes = (u,) + p.stations + (v,)
            ch = arc_charge(inst, nodes)
            if not ch.feasible:
                continue
            candidates.append(ChargeArc(u, v, p.stations, p.cost + c[s][v] + cv, ch))

    candidates.sort(key=lambda a: (a.cost, len(a.stations), a.stations))
    kept = []
    for a in candidates:
        if any(dominates(b, a, M) for b in kept):
            continue
        kept = [b for b in kept if not dominates(a, b, M)]
        kept.append(a)
    kept.sort(key=lambda a: (len(a.stations), a.stations))
    return kept


def _prefix_dominates(inst, u, p: _Prefix, q: _Prefix, linear: bool) -> bool:
    if linear:
        return (p.cost <= q.cost + 1e-9 and p.e_first <= q.e_first + 1e-9
                and p.key <= q.key + 1e-9 and p.depth <= q.depth)
    return _general_prefix_dominates(inst, u, p, q)


# ---------------------------------------------------------------------------
# depot graphs

@dataclass(eq=False)
class DepotGraph:
    """Acyclic multigraph of one depot.

    Vertices ``0..n-1`` are services, ``n`` is the origin and ``n+1`` the
    destination copy of the depot.
    """
    depot: int
    n: int
    capacity: float
    arcs: list
    depot_node: int
    fixed_cost: float = 0.0
    out_arcs: list = field(default=None, repr=False)
    in_arcs: list = field(default=None, repr=False)
    order: list = field(default=None, repr=False)

    def __post_init__(self):
        for i, a in enumerate(self.arcs):
            a.id = i
        self.out_arcs = [[] for _ in range(self.n + 2)]
        self.in_arcs = [[] for _ in range(self.n + 2)]
        for a in self.arcs:
            self.out_arcs[a.tail].append(a.id)
            self.in_arcs[a.head].append(a.id)

    @property
    def origin(self) -> int:
        return self.n

    @property
    def sink(self) -> int:
        return self.n + 1

    def element(self, vertex: int) -> int:
        return self.depot_node if vertex >= self.n else vertex

    def with_arcs(self, keep) -> "DepotGraph":
        """Subgraph keeping arcs for which ``keep(arc)`` is true; arc ids are remapped."""
        arcs = [_copy_arc(a) for a in self.arcs if keep(a)]
        g = DepotGraph(self.depot, self.n, self.capacity, arcs, self.depot_node, self.fixed_cost)
        g.order = self.order
        return g

    def topological_order(self) -> list:
        return list(self.order)

    def dump(self, path) -> None:
        """Write one line per arc: tail head stations cost rb re delta."""
        with open(path, "w") as fh:
            for a in self.arcs:
                ch = a.charge
                delta = getattr(ch, "delta", float("nan"))
                st = ",".join(str(s) for s in a.stations) or "-"
                fh.write(f"{a.tail} {a.head} {st} {a.cost!r} {ch.rb!r} {ch.re!r} {delta!r}\n")


def _copy_arc(a: ChargeArc) -> ChargeArc:
    return ChargeArc(a.tail, a.head, a.stations, a.cost, a.charge, a.id)


def _vertex_order(inst: Instance) -> list:
    # ties in time are broken by index so that the graph stays acyclic
    n = inst.n_services
    svc = sorted(range(n), key=lambda i: (inst.services[i].t_begin, inst.services[i].t_end, i))
    return [n] + svc + [n + 1]


def _precedes(inst: Instance, u: int, v: int) -> bool:
    su, sv = inst.services[u], inst.services[v]
    return (su.t_begin, su.t_end, u) < (sv.t_begin, sv.t_end, v)


def service_arcs(inst: Instance, max_stations: int = DEFAULT_MAX_STATIONS) -> dict:
    """Non-dominated arcs for every ordered, time-compatible service pair."""
    out = {}
    n = inst.n_services
    for u in range(n):
        for v in range(n):
            if u == v or not _precedes(inst, u, v):
                continue
            arcs = enumerate_nondominated(inst, u, v, max_stations)
            if arcs:
                out[(u, v)] = arcs
    return out


def build_depot_graph(inst: Instance, depot: int, max_stations: int = DEFAULT_MAX_STATIONS,
                      pair_arcs: Optional[dict] = None) -> DepotGraph:
    n = inst.n_services
    dn = inst.depot_node(depot)
    if pair_arcs is None:
        pair_arcs = service_arcs(inst, max_stations)
    arcs = []
    for v in range(n):
        for a in enumerate_nondominated(inst, dn, v, max_stations):
            arcs.append(ChargeArc(n, v, a.stations, a.cost, a.charge))
    for (u, v), lst in sorted(pair_arcs.items()):
        for a in lst:
            arcs.append(ChargeArc(u, v, a.stations, a.cost, a.charge))
    for u in range(n):
        for a in enumerate_nondominated(inst, u, dn, max_stations):
            arcs.append(ChargeArc(u, n + 1, a.stations, a.cost, a.charge))
    g = DepotGraph(depot, n, inst.capacity, arcs, dn, inst.vehicle.fixed_cost)
    g.order = _vertex_order(inst)
    return g


def build_graphs(inst: Instance, max_stations: int = DEFAULT_MAX_STATIONS) -> list:
    pair_arcs = service_arcs(inst, max_stations)
    return [build_depot_graph(inst, j, max_stations, pair_arcs) for j in range(len(inst.depots))]


def count_arcs(graphs: Sequence[DepotGraph]) -> int:
    return sum(len(g.arcs) for g in graphs)


def is_acyclic(g: DepotGraph) -> bool:
    from graphlib import CycleError, TopologicalSorter
    ts = TopologicalSorter()
    for v in range(g.n + 2):
        ts.add(v)
    for a in g.arcs:
        ts.add(a.head, a.tail)
    try:
        list(ts.static_order())
    except CycleError:
        return False
    return True
