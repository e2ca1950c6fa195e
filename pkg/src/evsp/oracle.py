"""Brute-force references used by the tests and the ``validate`` command.

Everything here is deliberately simple and exponential. It only depends on
the model module, plus the station lists of a depot graph when routes are
enumerated over a given arc set.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .model import (EPS, NEG_INF, Depot, Instance, LinearCharge, PiecewiseCharge, Service,
                    Station, VehicleSpec)

MAX_ORACLE_SERVICES = 14


class OracleSizeError(ValueError):
    pass


# ---------------------------------------------------------------------------
# schedule simulation

@dataclass
class Trace:
    arrivals: list
    departures: list
    levels_arrival: list
    levels_departure: list
    level_out: float
    time_ok: bool

    @property
    def feasible(self) -> bool:
        return self.time_ok and self.level_out != NEG_INF


def simulate_schedule(inst: Instance, nodes: Sequence[int], dwells: Sequence[float],
                      level_in: float) -> Trace:
    """Battery recursion along ``nodes`` with the given dwell at each station.

    The vehicle leaves the tail at its end time and never waits except to
    charge. A level that becomes negative makes the rest of the trace -inf.
    """
    e, d = inst.e, inst.delta
    model = inst.charge
    k = len(nodes) - 2
    if len(dwells) != k:
        raise ValueError("one dwell per station is required")
    level = level_in
    t = inst.t_end(nodes[0])
    arr, dep, la, ld = [], [], [], []

    def drive(level, a, b):
        if level == NEG_INF:
            return NEG_INF
        x = level - a
        return max(x, 0.0) if x >= -EPS else NEG_INF

    for i in range(1, k + 1):
        t += d[nodes[i - 1]][nodes[i]]
        level = drive(level, e[nodes[i - 1]][nodes[i]], None)
        arr.append(t)
        la.append(level)
        if dwells[i - 1] < 0:
            raise ValueError("negative dwell")
        t += dwells[i - 1]
        if level != NEG_INF:
            level = min(model.capacity, model.phi(level, dwells[i - 1]))
        dep.append(t)
        ld.append(level)
    t += d[nodes[-2]][nodes[-1]]
    level = drive(level, e[nodes[-2]][nodes[-1]] + inst.energy(nodes[-1]), None)
    return Trace(arr, dep, la, ld, level, t <= inst.t_begin(nodes[-1]) + EPS)


def best_dwells(inst: Instance, nodes: Sequence[int], level_in: float) -> Optional[list]:
    """Dwells that charge just enough before the last station and wait at it.

    Returns None when the sequence cannot be completed.
    """
    e, d = inst.e, inst.delta
    model = inst.charge
    k = len(nodes) - 2
    if k == 0:
        return []
    level = level_in
    t = inst.t_end(nodes[0])
    dwells = []
    for i in range(1, k + 1):
        t += d[nodes[i - 1]][nodes[i]]
        level -= e[nodes[i - 1]][nodes[i]]
        if level < -EPS:
            return None
        level = max(level, 0.0)
        if i < k:
            need = e[nodes[i]][nodes[i + 1]]
            w = 0.0
            if level < need:
                # smallest w with phi(level, w) >= need, by bisection on phi
                hi = model.full_time * 2 + 1.0
                if model.phi(level, hi) < need - 1e-12:
                    return None
                lo = 0.0
                for _ in range(200):
                    mid = 0.5 * (lo + hi)
                    if model.phi(level, mid) >= need:
                        hi = mid
                    else:
                        lo = mid
                w = hi
                level = need
            dwells.append(w)
            t += w
        else:
            w = inst.t_begin(nodes[-1]) - d[nodes[k]][nodes[-1]] - t
            if w < -EPS:
                return None
            dwells.append(max(w, 0.0))
    return dwells


def best_level(inst: Instance, nodes: Sequence[int], level_in: float) -> float:
    if level_in == NEG_INF:
        return NEG_INF
    dw = best_dwells(inst, nodes, level_in)
    if dw is None:
        return NEG_INF
    tr = simulate_schedule(inst, nodes, dw, level_in)
    return tr.level_out if tr.time_ok else NEG_INF


def _profile_arrays(model):
    if isinstance(model, LinearCharge):
        return np.array([0.0, model.full_time]), np.array([0.0, model.capacity])
    return np.array(model.times), np.array(model.levels)


def simulate_batch(inst: Instance, nodes: Sequence[int], dwells: np.ndarray,
                   level_in: float) -> np.ndarray:
    """Vectorized ``simulate_schedule`` over rows of ``dwells`` (shape (m, k)).

    Returns exit levels, -inf where the trace is infeasible in energy or time.
    """
    e, d = inst.e, inst.delta
    times, levels = _profile_arrays(inst.charge)
    cap = inst.capacity
    dwells = np.atleast_2d(np.asarray(dwells, dtype=float))
    m, k = dwells.shape
    level = np.full(m, float(level_in))
    ok = np.ones(m, dtype=bool)
    t = np.full(m, inst.t_end(nodes[0]))
    for i in range(1, k + 1):
        t += d[nodes[i - 1]][nodes[i]]
        level = level - e[nodes[i - 1]][nodes[i]]
        ok &= level >= -EPS
        level = np.maximum(level, 0.0)
        virt = np.interp(level, levels, times) + dwells[:, i - 1]
        charged = np.interp(virt, times, levels)
        level = np.where(level >= levels[-1], level, np.maximum(level, charged))
        level = np.minimum(level, cap)
        t += dwells[:, i - 1]
    t += d[nodes[-2]][nodes[-1]]
    level = level - e[nodes[-2]][nodes[-1]] - inst.energy(nodes[-1])
    ok &= level >= -EPS
    ok &= t <= inst.t_begin(nodes[-1]) + EPS
    return np.where(ok, np.maximum(level, 0.0), NEG_INF)


def linear_fc_batch(inst: Instance, nodes: Sequence[int], levels_in: np.ndarray) -> np.ndarray:
    """Exit levels under the just-enough/wait-last dwell rule, vectorized."""
    e, d = inst.e, inst.delta
    times, prof = _profile_arrays(inst.charge)
    cap = inst.capacity
    k = len(nodes) - 2
    level = np.asarray(levels_in, dtype=float).copy()
    ok = np.ones(level.shape, dtype=bool)
    t = np.full(level.shape, inst.t_end(nodes[0]))
    for i in range(1, k + 1):
        t += d[nodes[i - 1]][nodes[i]]
        level = level - e[nodes[i - 1]][nodes[i]]
        ok &= level >= -EPS
        level = np.maximum(level, 0.0)
        if i < k:
            need = e[nodes[i]][nodes[i + 1]]
            if need > prof[-1]:
                ok[:] = False
            low = level < need
            wait = np.interp(need, prof, times) - np.interp(level, prof, times)
            t = np.where(low, t + wait, t)
            level = np.where(low, need, level)
        else:
            w = inst.t_begin(nodes[-1]) - d[nodes[k]][nodes[-1]] - t
            ok &= w >= -EPS
            virt = np.interp(level, prof, times) + np.maximum(w, 0.0)
            level = np.where(level >= prof[-1], level, np.interp(virt, times, prof))
            level = np.minimum(level, cap)
    level = level - e[nodes[-2]][nodes[-1]] - inst.energy(nodes[-1])
    ok &= level >= -EPS
    return np.where(ok, np.maximum(level, 0.0), NEG_INF)


def linear_sequence_batch(leg_time: np.ndarray, leg_energy: np.ndarray, window: np.ndarray,
                          e_v: np.ndarray, rate: np.ndarray, capacity: float,
                          levels_in: np.ndarray, tol: float = EPS) -> np.ndarray:
    """Just-enough/wait-last schedule of many linear-charge sequences at once.

    Row ``r`` describes one sequence with ``k = leg_time.shape[1] - 1``
    stations: its legs, the time between the two services, the energy of the
    head service and the charge rate. ``levels_in`` has shape (N, L).
    Returns exit levels (N, L), -inf where infeasible. Battery levels count
    as feasible down to ``-tol``; time checks always allow ``EPS``.
    """
    leg_time = np.asarray(leg_time, dtype=float)
    leg_energy = np.asarray(leg_energy, dtype=float)
    n, legs = leg_time.shape
    k = legs - 1
    level = np.array(levels_in, dtype=float)
    col = lambda a: np.asarray(a, dtype=float).reshape(n, 1)  # noqa: E731
    window, e_v, rate = col(window), col(e_v), col(rate)
    ok = np.ones(level.shape, dtype=bool)
    spent = np.zeros(level.shape)
    for i in range(k):
        spent += leg_time[:, i:i + 1]
        level = level - leg_energy[:, i:i + 1]
        ok &= level >= -tol
        level = np.maximum(level, 0.0)
        if i < k - 1:
            need = leg_energy[:, i + 1:i + 2]
            ok &= need <= capacity
            low = level < need
            spent += np.where(low, (need - level) / rate, 0.0)
            level = np.where(low, need, level)
        else:
            wait = window - leg_time[:, k:k + 1] - spent
            ok &= wait >= -EPS
            level = np.minimum(capacity, level + rate * np.maximum(wait, 0.0))
            spent += np.maximum(wait, 0.0)
    spent += leg_time[:, k:k + 1]
    ok &= spent <= window + EPS
    level = level - leg_energy[:, k:k + 1] - e_v
    ok &= level >= -tol
    return np.where(ok, np.maximum(level, 0.0), NEG_INF)


def random_dwells(rng: np.random.Generator, slack: float, k: int, m: int) -> np.ndarray:
    """``m`` random dwell vectors with non-negative entries summing to at most ``slack``."""
    if k == 0:
        return np.zeros((m, 0))
    w = rng.dirichlet(np.ones(k), size=m)
    scale = rng.uniform(0.0, 1.0, size=(m, 1))
    scale[: m // 4] = 1.0  # a quarter of the samples use the whole slack
    return w * scale * max(slack, 0.0)


# ---------------------------------------------------------------------------
# routes

@dataclass(frozen=True)
class OracleRoute:
    depot: int
    arcs: tuple        # tuple of element-index tuples (u, stations..., v)
    services: tuple    # service indices in visiting order
    cost: float        # includes the vehicle fixed cost


def route_cost(inst: Instance, arcs: Sequence[Sequence[int]]) -> float:
    c = inst.cost
    total = inst.vehicle.fixed_cost
    for nodes in arcs:
        total += sum(c[a][b] for a, b in zip(nodes, nodes[1:]))
        total += inst.service_cost(nodes[-1])
    return total


def _time_ok(inst: Instance, nodes) -> bool:
    d = inst.delta
    return inst.t_end(nodes[0]) + sum(d[a][b] for a, b in zip(nodes, nodes[1:])) \
        <= inst.t_begin(nodes[-1]) + EPS


def enumerate_routes(inst: Instance, graph, max_services: Optional[int] = None) -> list:
    """Every feasible o-d path of ``graph`` (a depot graph), checked by simulation.

    ``graph`` only contributes the list of station sequences per vertex pair.
    Levels are propagated with ``best_level`` starting from a full battery.
    """
    n = inst.n_services
    if n > MAX_ORACLE_SERVICES:
        raise OracleSizeError(f"{n} services exceed the oracle limit {MAX_ORACLE_SERVICES}")
    if max_services is None:
        max_services = n
    dn = inst.depot_node(graph.depot)
    succ: dict = {}
    for a in graph.arcs:
        u = dn if a.tail >= n else a.tail
        v = dn if a.head >= n else a.head
        succ.setdefault(a.tail, []).append((a.head, (u,) + tuple(a.stations) + (v,)))
    routes = []
    memo: dict = {}

    def step(nodes, level):
        key = (nodes, level)
        if key not in memo:
            memo[key] = best_level(inst, nodes, level) if _time_ok(inst, nodes) else NEG_INF
        return memo[key]

    def dfs(vertex, level, arcs, services):
        for head, nodes in succ.get(vertex, ()):
            out = step(nodes, level)
            if out == NEG_INF:
                continue
            if head == n + 1:
                if services:
                    path = arcs + (nodes,)
                    routes.append(OracleRoute(graph.depot, path, services,
                                              route_cost(inst, path)))
            elif len(services) < max_services:
                dfs(head, out, arcs + (nodes,), services + (head,))

    dfs(n, inst.capacity, (), ())
    return routes


def route_reduced_cost(inst: Instance, route: OracleRoute, duals: Sequence[float],
                       arc_duals: Optional[dict] = None, depot_duals: Optional[dict] = None) -> float:
    rc = route.cost - sum(duals[s] for s in route.services)
    if depot_duals:
        rc -= depot_duals.get(route.depot, 0.0)
    if arc_duals:
        for nodes in route.arcs:
            rc -= arc_duals.get((nodes[0], nodes[-1]), 0.0)
    return rc


@dataclass
class ExactSolution:
    cost: float
    routes: list


def exact_small_solve(inst: Instance, graphs) -> Optional[ExactSolution]:
    """Minimum-cost exact cover of the services by enumerated routes.

    Keeps the cheapest route per (service set), then runs a DP over subsets.
    Returns None when no cover exists.
    """
    n = inst.n_services
    if n > MAX_ORACLE_SERVICES:
        raise OracleSizeError(f"{n} services exceed the oracle limit {MAX_ORACLE_SERVICES}")
    best: dict = {}
    for g in graphs:
        for r in enumerate_routes(inst, g):
            mask = 0
            for s in r.services:
                mask |= 1 << s
            cur = best.get(mask)
            if cur is None or r.cost < cur.cost - 1e-9:
                best[mask] = r
    by_low: dict = {}
    for mask in best:
        low = (mask & -mask).bit_length() - 1
        by_low.setdefault(low, []).append(mask)
    full = (1 << n) - 1
    f = {0: 0.0}
    choice: dict = {}
    for mask in range(full + 1):
        if mask not in f:
            continue
        free = ~mask & full
        if not free:
            continue
        low = (free & -free).bit_length() - 1
        base = f[mask]
        for sub in by_low.get(low, ()):
            if sub & mask:
                continue
            nm = mask | sub
            val = base + best[sub].cost
            if val < f.get(nm, math.inf) - 1e-9:
                f[nm] = val
                choice[nm] = sub
    if full not in f:
        return None
    routes = []
    mask = full
    while mask:
        sub = choice[mask]
        routes.append(best[sub])
        mask ^= sub
    return ExactSolution(f[full], routes)


# ---------------------------------------------------------------------------
# solution validation

@dataclass
class ValidationReport:
    feasible: bool
    cost: float
    claimed_cost: Optional[float]
    violation: Optional[dict] = None
    traces: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return {"feasible": self.feasible, "cost": self.cost, "claimed_cost": self.claimed_cost,
                "violation": self.violation, "traces": self.traces}


def validate(inst: Instance, solution: dict) -> ValidationReport:
    """Check a solution dictionary (the solver's JSON layout) from scratch."""
    n = inst.n_services
    index = {}
    for x in range(inst.n_elements):
        index.setdefault(("s" if x < n else "d" if inst.is_depot_node(x) else "c", inst.label(x)), x)
    seen = [0] * n
    total = 0.0
    traces = []

    def fail(kind, where):
        return ValidationReport(False, total, solution.get("cost"), {"kind": kind, "where": where},
                                traces)

    for ri, route in enumerate(solution.get("routes", [])):
        depot = index.get(("d", route.get("depot")))
        if depot is None:
            return fail("unknown depot", {"route": ri})
        arcs = route.get("arcs", [])
        if not arcs:
            return fail("empty route", {"route": ri})
        expected_tail = depot
        level = inst.capacity
        trace = [level]
        path = []
        for ai, arc in enumerate(arcs):
            last = ai == len(arcs) - 1
            head = index.get(("d" if last else "s", arc.get("to")))
            tail = index.get(("d" if ai == 0 else "s", arc.get("from")))
            if head is None or tail is None or tail != expected_tail:
                return fail("broken arc chain", {"route": ri, "arc": ai})
            if last and head != depot:
                return fail("route does not return to its depot", {"route": ri})
            stations = []
            for sid in arc.get("stations", []):
                x = index.get(("c", sid))
                if x is None:
                    return fail("unknown station", {"route": ri, "arc": ai})
                stations.append(x)
            nodes = (tail,) + tuple(stations) + (head,)
            if not _time_ok(inst, nodes):
                return fail("time window", {"route": ri, "arc": ai})
            stops = arc.get("stops")
            if stops is not None and len(stops) == len(stations):
                dwells = [s["departure"] - s["arrival"] for s in stops]
                if any(w < -EPS for w in dwells):
                    return fail("negative dwell", {"route": ri, "arc": ai})
                tr = simulate_schedule(inst, nodes, [max(w, 0.0) for w in dwells], level)
                if not tr.time_ok:
                    return fail("time window", {"route": ri, "arc": ai})
                for j, s in enumerate(stops):
                    if abs(s["arrival"] - tr.arrivals[j]) > 1e-6:
                        return fail("reported arrival time", {"route": ri, "arc": ai, "stop": j})
                    if abs(s["level_arrival"] - tr.levels_arrival[j]) > 1e-6 \
                            or abs(s["level_departure"] - tr.levels_departure[j]) > 1e-6:
                        return fail("reported battery level", {"route": ri, "arc": ai, "stop": j})
                out = tr.level_out
            else:
                out = best_level(inst, nodes, level)
            if out == NEG_INF:
                return fail("battery", {"route": ri, "arc": ai})
            level = out
            trace.append(level)
            path.append(nodes)
            if not last:
                seen[head] += 1
            expected_tail = head
        cost = route_cost(inst, path)
        if "cost" in route and abs(route["cost"] - cost) > 1e-6:
            return fail("route cost", {"route": ri})
        total += cost
        traces.append(trace)
    for s, cnt in enumerate(seen):
        if cnt != 1:
            return fail("coverage", {"service": inst.label(s), "count": cnt})
    claimed = solution.get("cost")
    if claimed is not None and abs(claimed - total) > 1e-6:
        return ValidationReport(False, total, claimed, {"kind": "total cost", "where": {}}, traces)
    return ValidationReport(True, total, claimed, None, traces)


# ---------------------------------------------------------------------------
# instance generator

def generate_instance(n_services: int, n_depots: int = 2, n_stations: int = 4, seed: int = 0,
                      horizon: float = 1440.0, speed: float = 0.5, side: float = 25.0,
                      energy_rate: float = 1.0, cost_rate: float = 1.0,
                      capacity: float = 120.0, charge_rate: float = 2.0,
                      service_length: tuple = (20.0, 90.0), fixed_cost: float = 10000.0,
                      piecewise: bool = False, name: Optional[str] = None) -> Instance:
    """Seeded random instance on a square of side ``side`` (distance units).

    Services run between two random points; travel time is distance/speed,
    energy is distance*energy_rate and cost is distance*cost_rate.
    """
    rng = np.random.default_rng(seed)
    starts = rng.uniform(0, side, size=(n_services, 2))
    ends = rng.uniform(0, side, size=(n_services, 2))
    depots = rng.uniform(0, side, size=(n_depots, 2))
    stations = rng.uniform(0, side, size=(n_stations, 2))
    src = np.vstack([ends, depots, stations])
    dst = np.vstack([starts, depots, stations])
    dist = np.linalg.norm(src[:, None, :] - dst[None, :, :], axis=2)
    np.fill_diagonal(dist, 0.0)
    dist = np.round(dist, 3)
    own = np.round(np.linalg.norm(ends - starts, axis=1), 3)
    # every service can be reached from and return to any depot in time
    margin = float(np.ceil(side * math.sqrt(2) / speed))
    services = []
    for i in range(n_services):
        length = max(float(rng.uniform(*service_length)), own[i] / speed)
        tb = float(np.round(rng.uniform(margin, horizon - length - margin), 2))
        te = float(np.round(tb + length, 2))
        services.append(Service(i, tb, te, float(np.round(own[i] * energy_rate, 3)), 0.0))
    vehicle = VehicleSpec(capacity, fixed_cost)
    if piecewise:
        t1 = 0.6 * capacity / charge_rate
        charge = PiecewiseCharge([(0, 0), (t1, 0.6 * capacity),
                                  (t1 + 0.25 * capacity / (0.5 * charge_rate), 0.85 * capacity),
                                  (t1 + 0.25 * capacity / (0.5 * charge_rate)
                                   + 0.15 * capacity / (0.2 * charge_rate), capacity)],
                                 capacity)
    else:
        charge = LinearCharge(charge_rate, capacity)
    return Instance(
        services=services, depots=[Depot(j) for j in range(n_depots)],
        stations=[Station(s) for s in range(n_stations)],
        travel_time=np.round(dist / speed, 3), travel_cost=np.round(dist * cost_rate, 3),
        travel_energy=np.round(dist * energy_rate, 3), horizon=horizon, vehicle=vehicle,
        charge=charge, name=name or f"gen_n{n_services}_d{n_depots}_s{n_stations}_seed{seed}")
