"""Goodness-based arc filter for depot graphs."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .charge_arcs import DepotGraph, StationSequence, optimal_schedule
from .model import POS_INF, Instance

# arc classes
DEPOT_PLAIN, DEPOT_CHARGING, SERVICE_PLAIN, SERVICE_CHARGING = 1, 2, 3, 4


@dataclass(frozen=True)
class SparsifyConfig:
    nu1: int = 2
    nu2: int = 2
    nu3: int = 15
    nu4: int = 2
    slack_weight: float = 0.1
    lost_time_weight: float = 0.1
    # "gap": t_begin(head) - t_end(tail); "span": t_end(head) - t_begin(tail)
    plain_slack: str = "gap"
    seed: int = 0

    def __post_init__(self):
        for k in ("nu1", "nu2", "nu3", "nu4"):
            if getattr(self, k) < 1:
                raise ValueError(f"{k} must be >= 1")
        if self.plain_slack not in ("gap", "span"):
            raise ValueError("plain_slack must be 'gap' or 'span'")

    def nu(self, cls: int) -> int:
        return (self.nu1, self.nu2, self.nu3, self.nu4)[cls - 1]


def lost_time(inst: Instance, tail: int, head: int, stations) -> float:
    """Idle time at the last station once the battery is full.

    The schedule starts with just enough charge to reach the first station.
    """
    stations = tuple(stations)
    if not stations:
        raise ValueError("lost time is only defined for charging arcs")
    seq = StationSequence(tail, head, stations, 0.0)
    sched = optimal_schedule(inst, seq, inst.e[tail][stations[0]])
    if not sched.stops or not sched.feasible:
        return 0.0
    last = sched.stops[-1]
    to_full = inst.charge.theta(inst.capacity) - inst.charge.theta(last.level_arrival)
    if to_full == POS_INF:
        return 0.0
    return max(0.0, last.departure - last.arrival - to_full)


def arc_class(graph: DepotGraph, arc) -> int:
    depot_adjacent = arc.tail >= graph.n or arc.head >= graph.n
    if depot_adjacent:
        return DEPOT_CHARGING if arc.stations else DEPOT_PLAIN
    return SERVICE_CHARGING if arc.stations else SERVICE_PLAIN


def goodness(inst: Instance, graph: DepotGraph, arc, cfg: SparsifyConfig) -> float:
    cls = arc_class(graph, arc)
    if cls in (DEPOT_PLAIN, DEPOT_CHARGING):
        return arc.cost
    u, v = arc.tail, arc.head
    if cls == SERVICE_PLAIN and cfg.plain_slack == "span":
        slack = inst.t_end(v) - inst.t_begin(u)
    else:
        slack = inst.t_begin(v) - inst.t_end(u)
    g = arc.cost + cfg.slack_weight * slack
    if cls == SERVICE_CHARGING:
        g += cfg.lost_time_weight * lost_time(inst, u, v, arc.stations)
    return g


def keep_mask(graph: DepotGraph, scores, classes, cfg: SparsifyConfig,
              rng: np.random.Generator) -> list:
    """Arc kept iff it is among the nu best of its class out of its tail or into its head."""
    m = len(graph.arcs)
    ties = rng.random(m)
    keep = [False] * m
    groups: dict = {}
    for a in graph.arcs:
        cls = classes[a.id]
        groups.setdefault(("out", a.tail, cls), []).append(a.id)
        groups.setdefault(("in", a.head, cls), []).append(a.id)
    for (_, _, cls), ids in groups.items():
        nu = cfg.nu(cls)
        if len(ids) <= nu:
            for i in ids:
                keep[i] = True
            continue
        ids.sort(key=lambda i: (scores[i], ties[i]))
        for i in ids[:nu]:
            keep[i] = True
    return keep


def sparsify(inst: Instance, graph: DepotGraph, cfg: SparsifyConfig = SparsifyConfig()) -> DepotGraph:
    rng = np.random.default_rng([cfg.seed, graph.depot])
    classes = [arc_class(graph, a) for a in graph.arcs]
    scores = [goodness(inst, graph, a, cfg) for a in graph.arcs]
    keep = keep_mask(graph, scores, classes, cfg, rng)
    return graph.with_arcs(lambda a: keep[a.id])
