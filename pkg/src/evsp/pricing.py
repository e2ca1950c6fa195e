"""Pricing: minimum reduced-cost o-d paths with battery feasibility.

Backward bounds give, for every vertex, a lower bound on the reduced cost of
any completion and on the level needed to finish. Forward labels are then
enumerated best-first by ``reduced cost + completion bound``.
"""
from __future__ import annotations

import heapq
from bisect import bisect_left, bisect_right
from dataclasses import dataclass
from typing import Optional, Sequence

from .charge_arcs import DepotGraph, LinearArcCharge
from .model import EPS, NEG_INF, POS_INF

INF = POS_INF


@dataclass
class PricedRoute:
    depot: int
    arcs: tuple          # arc ids in the depot graph
    services: tuple      # service indices in visiting order
    cost: float          # true cost including the vehicle fixed cost
    reduced_cost: float


class ArcTable:
    """Flat per-arc arrays of a depot graph, built once and cached on it."""

    def __init__(self, graph: DepotGraph):
        arcs = graph.arcs
        self.heads = [a.head for a in arcs]
        self.tails = [a.tail for a in arcs]
        self.costs = [a.cost for a in arcs]
        self.linear = [isinstance(a.charge, LinearArcCharge) for a in arcs]
        self.rb = [a.charge.rb for a in arcs]
        self.re = [a.charge.re for a in arcs]
        self.delta = [a.charge.delta if lin else 0.0 for a, lin in zip(arcs, self.linear)]
        self.charge = [a.charge for a in arcs]
        self.out = [list(ids) for ids in graph.out_arcs]
        self.order = list(graph.order)


def arc_table(graph: DepotGraph) -> ArcTable:
    t = getattr(graph, "_table", None)
    if t is None:
        t = ArcTable(graph)
        graph._table = t
    return t


def reduced_costs(graph: DepotGraph, duals: Sequence[float], fixed_cost: float,
                  depot_dual: float = 0.0, arc_duals: Optional[dict] = None,
                  removed: Optional[set] = None) -> list:
    """Reduced cost of every arc; ``inf`` marks arcs removed from the graph.

    ``duals`` are the service partition duals, ``depot_dual`` the dual of a
    vehicle-count row of this depot and ``arc_duals`` maps a service pair
    ``(u, v)`` to the dual of its traversal row. ``removed`` holds arc ids.
    """
    n = graph.n
    out = []
    for a in graph.arcs:
        if removed and a.id in removed:
            out.append(INF)
            continue
        c = a.cost
        if a.tail == n:
            c += fixed_cost - depot_dual
        if a.head != n + 1:
            c -= duals[a.head]
        if arc_duals:
            c -= arc_duals.get((a.tail, a.head), 0.0)
        out.append(c)
    return out


def compute_bounds(graph: DepotGraph, rc: Sequence[float]) -> tuple:
    """Per-vertex meet of all completion resources: (reduced cost, min level).

    Unreachable vertices get ``(inf, inf)``.
    """
    t = arc_table(graph)
    n = graph.n
    size = n + 2
    bcost = [INF] * size
    blevel = [INF] * size
    bcost[n + 1] = 0.0
    blevel[n + 1] = 0.0
    M = graph.capacity
    heads, lin, rbs, res, deltas, charge = t.heads, t.linear, t.rb, t.re, t.delta, t.charge
    for v in reversed(t.order):
        if v == n + 1:
            continue
        bc_best, bm_best = INF, INF
        for i in t.out[v]:
            c = rc[i]
            if c == INF:
                continue
            w = heads[i]
            mw = blevel[w]
            if mw == INF:
                continue
            if lin[i]:
                if mw > res[i] + EPS:
                    continue
                m = mw - deltas[i]
                if m < rbs[i]:
                    m = rbs[i]
            else:
                m = charge[i].bc(mw)
            if m > M + EPS:
                continue
            cc = c + bcost[w]
            if cc < bc_best:
                bc_best = cc
            if m < bm_best:
                bm_best = m
        bcost[v], blevel[v] = bc_best, bm_best
    return bcost, blevel


def fbc(q_cost: float, q_level: float, b_cost: float, b_level: float) -> float:
    """Lower bound on the reduced cost of any feasible completion of a prefix."""
    if q_level == NEG_INF or b_level == INF or q_cost == INF:
        return INF
    if q_level >= b_level - EPS:
        return q_cost + b_cost
    return INF


def price(graph: DepotGraph, rc: Sequence[float], bounds: Optional[tuple] = None,
          max_columns: int = 200, threshold: float = -EPS,
          max_labels: Optional[int] = None) -> list:
    """Routes with reduced cost below ``threshold``, best first.

    Returns up to ``max_columns`` distinct routes. The cheapest route below
    the threshold is always the first one when it exists. ``max_labels``
    caps the number of settled labels (no optimality guarantee when hit).
    """
    t = arc_table(graph)
    if bounds is None:
        bounds = compute_bounds(graph, rc)
    bcost, blevel = bounds
    n = graph.n
    origin, sink = n, n + 1
    M = graph.capacity
    if blevel[origin] > M + EPS or bcost[origin] >= threshold:
        return []
    heads, lin, rbs, res, deltas, charge, costs = (t.heads, t.linear, t.rb, t.re, t.delta,
                                                    t.charge, t.costs)
    out_arcs = t.out
    # label: [rc, level, vertex, parent, arc, alive]
    root = [0.0, M, origin, None, -1, True]
    heap = [(bcost[origin], 0, root)]
    counter = 1
    front_cost: list = [[] for _ in range(n + 2)]
    front_level: list = [[] for _ in range(n + 2)]
    front_lab: list = [[] for _ in range(n + 2)]
    found = []
    settled = 0
    while heap:
        key, _, lab = heapq.heappop(heap)
        if key >= threshold:
            break
        if not lab[5]:
            continue
        v = lab[2]
        if v == sink:
            found.append(lab)
            if len(found) >= max_columns:
                break
            continue
        settled += 1
        if max_labels is not None and settled > max_labels:
            break
        c0, l0 = lab[0], lab[1]
        for i in out_arcs[v]:
            ca = rc[i]
            if ca == INF:
                continue
            w = heads[i]
            mw = blevel[w]
            if mw == INF:
                continue
            if lin[i]:
                if l0 < rbs[i] - EPS:
                    continue
                l1 = l0 + deltas[i]
                if l1 > res[i]:
                    l1 = res[i]
                if l1 < 0.0:
                    l1 = 0.0
            else:
                l1 = charge[i].fc(l0)
                if l1 == NEG_INF:
                    continue
            if l1 < mw - EPS:
                continue
            c1 = c0 + ca
            k1 = c1 + bcost[w]
            if k1 >= threshold:
                continue
            if w != sink:
                fc_, fl_, fb_ = front_cost[w], front_level[w], front_lab[w]
                # labels with cost <= c1; the last one has the highest level
                j = bisect_right(fc_, c1)
                if j and fl_[j - 1] >= l1:
                    continue
                # labels from j on with level <= l1 are dominated by the new one
                r = j
                while r < len(fl_) and fl_[r] <= l1:
                    fb_[r][5] = False
                    r += 1
                # same cost but a lower level
                lo = j
                while lo and fc_[lo - 1] == c1:
                    lo -= 1
                    fb_[lo][5] = False
                new = [c1, l1, w, lab, i, True]
                fc_[lo:r] = [c1]
                fl_[lo:r] = [l1]
                fb_[lo:r] = [new]
            else:
                new = [c1, l1, w, lab, i, True]
            heapq.heappush(heap, (k1, counter, new))
            counter += 1
    routes = []
    for lab in found:
        arcs = []
        node = lab
        while node[3] is not None:
            arcs.append(node[4])
            node = node[3]
        arcs.reverse()
        services = tuple(heads[i] for i in arcs[:-1])
        cost = graph.fixed_cost + sum(costs[i] for i in arcs)
        routes.append(PricedRoute(graph.depot, tuple(arcs), services, cost, lab[0]))
    return routes


def route_levels(graph: DepotGraph, arcs: Sequence[int]) -> list:
    """Battery level after each arc of a route starting full (-inf if infeasible)."""
    level = graph.capacity
    out = []
    for i in arcs:
        level = graph.arcs[i].fc(level) if level != NEG_INF else NEG_INF
        out.append(level)
    return out
