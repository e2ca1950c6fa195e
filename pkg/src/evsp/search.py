"""Branch-and-price and the diving heuristic."""
from __future__ import annotations

import heapq
import logging
import math
import time
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .charge_arcs import DepotGraph, optimal_schedule, make_sequence
from .master import (Column, ColumnPool, DepotRow, NodeSpec, column_generation, is_integral)
from .model import EPS, Instance

log = logging.getLogger(__name__)

FRAC_TOL = 1e-6


class NothingToBranch(ValueError):
    pass


# ---------------------------------------------------------------------------
# branching

@dataclass(frozen=True)
class Branch:
    """Two-way split: ``kind`` is "depot", "arc" or "assign"."""
    kind: str
    key: tuple
    value: float

    @property
    def floor(self) -> int:
        return math.floor(self.value)

    @property
    def ceil(self) -> int:
        return math.ceil(self.value)


def _most_fractional(values: dict) -> Optional[tuple]:
    best, best_key = None, None
    for key in sorted(values):
        v = values[key]
        f = v - math.floor(v)
        if f < FRAC_TOL or f > 1 - FRAC_TOL:
            continue
        score = abs(f - 0.5)
        if best is None or score < best - 1e-12:
            best, best_key = score, key
    return best_key


def depot_counts(x: dict, columns: dict) -> dict:
    out: dict = {}
    for cid, v in x.items():
        d = columns[cid].depot
        out[d] = out.get(d, 0.0) + v
    return out


def traversal_flows(x: dict, columns: dict, n: int) -> dict:
    out: dict = {}
    for cid, v in x.items():
        for t, h in columns[cid].pairs:
            if t < n and h < n:
                out[(t, h)] = out.get((t, h), 0.0) + v
    return out


def assignment_values(x: dict, columns: dict) -> dict:
    out: dict = {}
    for cid, v in x.items():
        col = columns[cid]
        for s in col.services:
            out[(col.depot, s)] = out.get((col.depot, s), 0.0) + v
    return out


def select_branch(x: dict, columns: dict, n: int) -> Branch:
    """Vehicle count per depot first, then aggregated service-to-service flow.

    Falls back to the depot assignment of a service. Raises NothingToBranch
    when all of these are integral.
    """
    if is_integral(x, FRAC_TOL):
        raise NothingToBranch("solution is integral")
    for kind, values in (("depot", depot_counts(x, columns)),
                         ("arc", traversal_flows(x, columns, n)),
                         ("assign", assignment_values(x, columns))):
        key = _most_fractional(values)
        if key is not None:
            k = key if isinstance(key, tuple) else (key,)
            return Branch(kind, k, values[key])
    raise NothingToBranch("all branching quantities are integral")


def extract_integral(x: dict, columns: dict) -> list:
    """Integer solution when every branching quantity is integral.

    The support then splits into groups of columns serving the same
    services from the same depot; the cheapest of each group is kept.
    """
    groups: dict = {}
    for cid in sorted(x):
        col = columns[cid]
        key = (col.depot, col.services)
        if key not in groups or col.cost < groups[key].cost:
            groups[key] = col
    return list(groups.values())


@dataclass(frozen=True)
class Restrictions:
    """Branching decisions accumulated along a tree path."""
    depot_rows: tuple = ()
    arc_zero: frozenset = frozenset()          # (u, v) pairs forbidden
    arc_one: tuple = ()                         # (u, v) pairs forced
    assign_zero: frozenset = frozenset()       # (depot, service) forbidden
    assign_one: tuple = ()                      # (depot, service) forced

    def forbid(self, depot: int, tail: int, head: int) -> bool:
        if (tail, head) in self.arc_zero:
            return True
        for u, v in self.arc_one:
            if (tail == u) != (head == v):
                return True
        if (depot, head) in self.assign_zero:
            return True
        for d, s in self.assign_one:
            if head == s and depot != d:
                return True
        return False

    def child(self, branch: Branch, up: bool) -> "Restrictions":
        if branch.kind == "depot":
            row = DepotRow(branch.key[0], "G" if up else "L", float(branch.ceil if up else branch.floor))
            return Restrictions(self.depot_rows + (row,), self.arc_zero, self.arc_one,
                                self.assign_zero, self.assign_one)
        if branch.kind == "arc":
            if up:
                return Restrictions(self.depot_rows, self.arc_zero, self.arc_one + (branch.key,),
                                    self.assign_zero, self.assign_one)
            return Restrictions(self.depot_rows, self.arc_zero | {branch.key}, self.arc_one,
                                self.assign_zero, self.assign_one)
        if up:
            return Restrictions(self.depot_rows, self.arc_zero, self.arc_one, self.assign_zero,
                                self.assign_one + (branch.key,))
        return Restrictions(self.depot_rows, self.arc_zero, self.arc_one,
                            self.assign_zero | {branch.key}, self.assign_one)

    def is_empty(self) -> bool:
        return not (self.arc_zero or self.arc_one or self.assign_zero or self.assign_one)

    def spec(self, active: Sequence[int]) -> NodeSpec:
        return NodeSpec(tuple(active), self.depot_rows, None if self.is_empty() else self.forbid)


# ---------------------------------------------------------------------------
# solutions

@dataclass
class Solution:
    routes: list          # Column objects
    cost: float
    bound: float
    status: str           # "optimal", "feasible", "infeasible" or "limit"
    stats: dict = field(default_factory=dict)

    @property
    def vehicles(self) -> int:
        return len(self.routes)

    @property
    def gap(self) -> float:
        if not self.routes or not math.isfinite(self.bound):
            return math.inf
        return (self.cost - self.bound) / abs(self.cost) if self.cost else 0.0


def solution_to_dict(inst: Instance, graphs: Sequence[DepotGraph], sol: Solution) -> dict:
    """JSON-ready solution with the optimal schedule of every charging stop."""
    gmap = {g.depot: g for g in graphs}
    routes = []
    driving = 0.0
    for col in sorted(sol.routes, key=lambda c: (c.depot, c.services, c.arcs)):
        g = gmap[col.depot]
        level = inst.capacity
        arcs = []
        for i in col.arcs:
            a = g.arcs[i]
            u, v = g.element(a.tail), g.element(a.head)
            seq = make_sequence(inst, u, v, a.stations)
            sched = optimal_schedule(inst, seq, level)
            stops = [{"station": inst.label(s.station), "arrival": round(s.arrival, 9),
                      "departure": round(s.departure, 9),
                      "level_arrival": round(s.level_arrival, 9),
                      "level_departure": round(s.level_departure, 9)} for s in sched.stops]
            arcs.append({"from": inst.label(u), "to": inst.label(v),
                         "stations": [inst.label(s) for s in a.stations], "stops": stops,
                         "level_out": round(sched.level_out, 9), "cost": a.cost})
            level = sched.level_out
        driving += col.cost - inst.vehicle.fixed_cost
        routes.append({"depot": inst.depots[col.depot].id,
                       "services": [inst.label(s) for s in col.services],
                       "arcs": arcs, "cost": col.cost})
    return {
        "instance": inst.name,
        "status": sol.status,
        "cost": sol.cost if sol.routes else None,
        "routes": routes,
        "summary": {"vehicles": len(sol.routes), "driving_cost": driving,
                    "total": sol.cost if sol.routes else None,
                    "bound": sol.bound if math.isfinite(sol.bound) else None,
                    "gap": sol.gap if math.isfinite(sol.gap) else None},
    }


# ---------------------------------------------------------------------------
# branch-and-price

@dataclass
class Limits:
    time_limit: float = math.inf
    node_limit: int = 1_000_000


def branch_and_price(inst: Instance, graphs: Sequence[DepotGraph], limits: Limits = Limits(),
                     backend: str = "highs", threads: int = 1,
                     pool: Optional[ColumnPool] = None) -> Solution:
    """Best-bound branch-and-price over the given depot graphs."""
    start = time.perf_counter()
    n = inst.n_services
    pool = pool if pool is not None else ColumnPool()
    active = tuple(range(n))
    best: Optional[list] = None
    best_cost = math.inf
    heap = []
    counter = 0
    nodes = 0
    root_bound = None
    hit_limit = False
    open_bound = math.inf
    trace = []      # (popped bound, node LP value)

    def evaluate(restr: Restrictions):
        return column_generation(inst, graphs, pool, restr.spec(active), backend=backend,
                                 threads=threads)

    heap.append((-math.inf, 0, Restrictions()))
    while heap:
        if nodes >= limits.node_limit or time.perf_counter() - start > limits.time_limit:
            hit_limit = True
            break
        bound, _, restr = heapq.heappop(heap)
        if bound >= best_cost - 1e-6:
            continue
        nodes += 1
        cg = evaluate(restr)
        trace.append((bound, cg.lp_value if cg.status == "optimal" else math.inf))
        if root_bound is None:
            root_bound = cg.lp_value if cg.status == "optimal" else math.inf
        if cg.status != "optimal" or cg.lp_value >= best_cost - 1e-6:
            continue
        cols = {c.id: c for c in cg.columns}
        try:
            br = select_branch(cg.x, cols, n)
        except NothingToBranch:
            if is_integral(cg.x, FRAC_TOL):
                routes = [cols[c] for c, v in cg.x.items() if v > 1 - FRAC_TOL]
            else:
                routes = extract_integral(cg.x, cols)
            cost = sum(c.cost for c in routes)
            if cost < best_cost - 1e-9:
                best, best_cost = routes, cost
            continue
        for up in (False, True):
            counter += 1
            heapq.heappush(heap, (cg.lp_value, counter, restr.child(br, up)))
    open_bound = min((b for b, _, _ in heap), default=math.inf) if hit_limit else math.inf
    bound = min(best_cost, open_bound)
    if best is None:
        status = "limit" if hit_limit else "infeasible"
    else:
        status = "limit" if hit_limit else "optimal"
    stats = {"nodes": nodes, "root_lp": root_bound, "columns": len(pool),
             "time": time.perf_counter() - start, "trace": trace}
    return Solution(best or [], best_cost if best else math.inf, bound, status, stats)


# ---------------------------------------------------------------------------
# diving

@dataclass(frozen=True)
class DivingConfig:
    sddl: int = 2       # depth limit for strong diving
    sdms: int = 2       # candidates evaluated per strong step
    dmr: int = 1        # routes fixed per regular step
    sr: bool = True     # seed the pool with singleton routes
    seed: int = 0

    def __post_init__(self):
        if self.sddl < 0 or self.sdms < 0 or self.dmr < 1:
            raise ValueError("need sddl >= 0, sdms >= 0 and dmr >= 1")


def singleton_columns(inst: Instance, graphs: Sequence[DepotGraph], pool: ColumnPool) -> list:
    """Cheapest feasible one-service route of every service, over all depots."""
    from .pricing import PricedRoute
    best: dict = {}
    for g in graphs:
        for s in range(inst.n_services):
            for i in g.in_arcs[s]:
                a = g.arcs[i]
                if a.tail != g.origin:
                    continue
                level = a.fc(inst.capacity)
                for j in g.out_arcs[s]:
                    b = g.arcs[j]
                    if b.head != g.sink or b.fc(level) == -math.inf:
                        continue
                    cost = inst.vehicle.fixed_cost + a.cost + b.cost
                    if s not in best or cost < best[s][1].cost - 1e-9:
                        best[s] = (g, PricedRoute(g.depot, (i, j), (s,), cost, 0.0))
    out = []
    for s in sorted(best):
        g, r = best[s]
        col = pool.add(g, r)
        out.append(col if col is not None else pool.get(r.depot, r.arcs))
    return out


def dive(inst: Instance, graphs: Sequence[DepotGraph], cfg: DivingConfig = DivingConfig(),
         limits: Limits = Limits(), backend: str = "highs", threads: int = 1,
         pool: Optional[ColumnPool] = None) -> Solution:
    """Depth-first route fixing on top of column generation."""
    start = time.perf_counter()
    rng = np.random.default_rng(cfg.seed)
    pool = pool if pool is not None else ColumnPool()
    if cfg.sr:
        singleton_columns(inst, graphs, pool)
    active = list(range(inst.n_services))
    fixed: list = []
    depth = 0
    nodes = 0
    root_lp = None

    def run(act):
        return column_generation(inst, graphs, pool, NodeSpec(tuple(act)), backend=backend,
                                 threads=threads)

    def finish(status, bound=-math.inf):
        cost = sum(c.cost for c in fixed) if status != "infeasible" else math.inf
        stats = {"nodes": nodes, "depth": depth, "root_lp": root_lp, "columns": len(pool),
                 "time": time.perf_counter() - start}
        return Solution(list(fixed) if status != "infeasible" else [], cost,
                        root_lp if root_lp is not None else -math.inf, status, stats)

    cg = run(active)
    nodes += 1
    if cg.status != "optimal":
        return finish("infeasible")
    root_lp = cg.lp_value
    while active:
        if time.perf_counter() - start > limits.time_limit or nodes >= limits.node_limit:
            return finish("limit")
        cols = {c.id: c for c in cg.columns}
        if is_integral(cg.x, FRAC_TOL):
            fixed.extend(cols[c] for c in sorted(cg.x) if cg.x[c] > 1 - FRAC_TOL)
            active = []
            break
        # near-one routes are fixed without evaluation
        ones = [cols[c] for c in sorted(cg.x) if cg.x[c] >= 1 - FRAC_TOL]
        if ones:
            chosen = _disjoint(ones, len(ones))
        else:
            ties = {c: rng.random() for c in sorted(cg.x)}
            order = sorted(cg.x, key=lambda c: (-cg.x[c], ties[c]))
            chosen = None
            if depth < cfg.sddl and cfg.sdms > 0:
                best_val, best_cg = math.inf, None
                for cid in order[: cfg.sdms]:
                    col = cols[cid]
                    rest = [s for s in active if s not in col.services]
                    child = run(rest)
                    nodes += 1
                    if child.status != "optimal":
                        continue
                    val = col.cost + child.lp_value
                    if val < best_val - 1e-9:
                        best_val, chosen, best_cg = val, [col], child
                if chosen is not None:
                    fixed.extend(chosen)
                    covered = {s for c in chosen for s in c.services}
                    active = [s for s in active if s not in covered]
                    cg = best_cg
                    depth += 1
                    continue
            chosen = _disjoint([cols[c] for c in order], cfg.dmr)
            depth += 1
        fixed.extend(chosen)
        covered = {s for c in chosen for s in c.services}
        active = [s for s in active if s not in covered]
        if not active:
            break
        cg = run(active)
        nodes += 1
        if cg.status != "optimal":
            return finish("infeasible")
    return finish("feasible")


def _disjoint(columns: Sequence[Column], limit: int) -> list:
    out, used = [], set()
    for c in columns:
        if used.isdisjoint(c.services):
            out.append(c)
            used.update(c.services)
            if len(out) >= limit:
                break
    return out
